#include <panelbn/structure.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <tuple>

#include <panelbn/error.hpp>
#include <panelbn/random.hpp>

namespace panelbn {

namespace {

std::vector<std::string> distinct_names(std::vector<std::string> names) {
    auto sorted = names;
    std::sort(sorted.begin(), sorted.end());
    if (auto it = std::adjacent_find(sorted.begin(), sorted.end()); it != sorted.end())
        throw ValidationError("duplicate condition name '" + *it + "'");
    return names;
}

}  // namespace

std::size_t ArcSet::size() const {
    return static_cast<std::size_t>(std::count(m_bits.begin(), m_bits.end(), 1));
}

std::vector<Arc> ArcSet::arcs() const {
    std::vector<Arc> out;
    for (std::size_t i = 0; i < m_n; ++i)
        for (std::size_t j = 0; j < m_n; ++j)
            if (has(i, j)) out.push_back({i, j});
    return out;
}

std::vector<std::size_t> ArcSet::parents(std::size_t to) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m_n; ++i)
        if (has(i, to)) out.push_back(i);
    return out;
}

TwoSliceGraph::TwoSliceGraph(std::vector<std::string> conditions)
    : m_conditions(distinct_names(std::move(conditions))), m_arcs(m_conditions.size()) {}

std::size_t TwoSliceGraph::condition_index(const std::string& name) const {
    auto it = std::find(m_conditions.begin(), m_conditions.end(), name);
    if (it == m_conditions.end()) throw ValidationError("unknown condition '" + name + "'");
    return static_cast<std::size_t>(it - m_conditions.begin());
}

void TwoSliceGraph::check(std::size_t from, std::size_t to) const {
    if (from >= n_conditions() || to >= n_conditions())
        throw ValidationError("arc endpoint out of range for a graph over " + std::to_string(n_conditions()) +
                              " conditions");
}

void TwoSliceGraph::add_arc(std::size_t from, std::size_t to) {
    check(from, to);
    m_arcs.set(from, to, true);
}

void TwoSliceGraph::add_arc(NodeRef from, NodeRef to) {
    if (from.slice != Slice::t0 || to.slice != Slice::t1)
        throw ValidationError("arcs must point forward in time from slice 0 to slice 1");
    add_arc(from.condition, to.condition);
}

void TwoSliceGraph::remove_arc(std::size_t from, std::size_t to) {
    check(from, to);
    m_arcs.set(from, to, false);
}

std::vector<NodeRef> TwoSliceGraph::parents(std::size_t condition) const {
    std::vector<NodeRef> out;
    for (auto p : m_arcs.parents(condition)) out.push_back(at_t0(p));
    return out;
}

StaticDag::StaticDag(std::vector<std::string> conditions)
    : m_conditions(distinct_names(std::move(conditions))), m_arcs(m_conditions.size()) {}

bool StaticDag::has_path(std::size_t from, std::size_t to) const {
    std::vector<char> seen(n_conditions(), 0);
    std::vector<std::size_t> stack{from};
    seen[from] = 1;
    while (!stack.empty()) {
        auto u = stack.back();
        stack.pop_back();
        if (u == to) return true;
        for (std::size_t v = 0; v < n_conditions(); ++v)
            if (m_arcs.has(u, v) && !seen[v]) {
                seen[v] = 1;
                stack.push_back(v);
            }
    }
    return false;
}

bool StaticDag::would_create_cycle(std::size_t from, std::size_t to) const {
    return from == to || has_path(to, from);
}

void StaticDag::add_arc(std::size_t from, std::size_t to) {
    if (from >= n_conditions() || to >= n_conditions()) throw ValidationError("arc endpoint out of range");
    if (m_arcs.has(from, to)) return;
    if (would_create_cycle(from, to))
        throw ValidationError("arc " + m_conditions[from] + " -> " + m_conditions[to] + " would create a cycle");
    m_arcs.set(from, to, true);
}

void StaticDag::remove_arc(std::size_t from, std::size_t to) {
    if (from >= n_conditions() || to >= n_conditions()) throw ValidationError("arc endpoint out of range");
    m_arcs.set(from, to, false);
}

std::string to_string(EdgeKind kind) {
    switch (kind) {
        case EdgeKind::one_way: return "one_way";
        case EdgeKind::feedback: return "feedback";
        case EdgeKind::self_loop: return "self_loop";
    }
    return "?";
}

EdgeKind parse_edge_kind(const std::string& name) {
    if (name == "one_way") return EdgeKind::one_way;
    if (name == "feedback") return EdgeKind::feedback;
    if (name == "self_loop") return EdgeKind::self_loop;
    throw ValidationError("unknown edge kind '" + name + "'");
}

FoldedGraph::FoldedGraph(std::vector<std::string> conditions) : m_conditions(distinct_names(std::move(conditions))) {}

std::optional<EdgeKind> FoldedGraph::relation(std::size_t a, std::size_t b) const {
    for (const auto& e : m_edges) {
        if (e.kind == EdgeKind::self_loop) {
            if (a == b && e.from == a) return EdgeKind::self_loop;
        } else if (e.kind == EdgeKind::feedback) {
            if ((e.from == a && e.to == b) || (e.from == b && e.to == a)) return EdgeKind::feedback;
        } else if (e.from == a && e.to == b) {
            return EdgeKind::one_way;
        }
    }
    return std::nullopt;
}

void FoldedGraph::add_edge(std::size_t from, std::size_t to, EdgeKind kind) {
    if (from >= n_conditions() || to >= n_conditions()) throw ValidationError("edge endpoint out of range");
    if ((kind == EdgeKind::self_loop) != (from == to))
        throw ValidationError("self loops must join a condition to itself and nothing else may");
    if (kind == EdgeKind::feedback && from > to) std::swap(from, to);
    FoldedEdge edge{from, to, kind};
    if (std::find(m_edges.begin(), m_edges.end(), edge) != m_edges.end()) return;
    if (kind != EdgeKind::self_loop) {
        for (const auto& e : m_edges) {
            if (e.kind == EdgeKind::self_loop) continue;
            bool same_pair = (e.from == from && e.to == to) || (e.from == to && e.to == from);
            if (same_pair)
                throw ValidationError("conflicting folded edges between " + m_conditions[from] + " and " +
                                      m_conditions[to] + "; use a single feedback edge");
        }
    }
    m_edges.insert(std::upper_bound(m_edges.begin(), m_edges.end(), edge), edge);
}

FoldedGraph fold(const TwoSliceGraph& graph) {
    FoldedGraph out(graph.conditions());
    const std::size_t p = graph.n_conditions();
    for (std::size_t i = 0; i < p; ++i) {
        if (graph.has_arc(i, i)) out.add_edge(i, i, EdgeKind::self_loop);
        for (std::size_t j = i + 1; j < p; ++j) {
            const bool ij = graph.has_arc(i, j), ji = graph.has_arc(j, i);
            if (ij && ji) {
                out.add_edge(i, j, EdgeKind::feedback);
            } else if (ij) {
                out.add_edge(i, j, EdgeKind::one_way);
            } else if (ji) {
                out.add_edge(j, i, EdgeKind::one_way);
            }
        }
    }
    return out;
}

TwoSliceGraph unfold(const FoldedGraph& folded) {
    TwoSliceGraph out(folded.conditions());
    for (const auto& e : folded.edges()) {
        out.add_arc(e.from, e.to);
        if (e.kind == EdgeKind::feedback) out.add_arc(e.to, e.from);
    }
    return out;
}

double network_score(const SufficientStats& stats, const TwoSliceGraph& graph, const PenaltyConfig& penalty) {
    const std::size_t p = graph.n_conditions();
    double total = 0.0;
    for (std::size_t j = 0; j < p; ++j) total += stats.local_score(p + j, graph.arc_set().parents(j), penalty);
    return total;
}

double network_score(const TransitionTable& data, const TwoSliceGraph& graph, const PenaltyConfig& penalty) {
    double total = 0.0;
    for (std::size_t j = 0; j < graph.n_conditions(); ++j) {
        auto parents = graph.parents(j);
        total += score_node(at_t1(j), parents, data, penalty);
    }
    return total;
}

double network_score(const SufficientStats& stats, const StaticDag& dag, const PenaltyConfig& penalty) {
    const std::size_t p = dag.n_conditions();
    double total = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        auto parents = dag.parents(j);
        for (auto& c : parents) c += p;
        total += stats.local_score(p + j, parents, penalty);
    }
    return total;
}

namespace {

constexpr double no_move = -std::numeric_limits<double>::infinity();

std::vector<std::size_t> resolve_order(const SearchOptions& opts, std::size_t p) {
    if (opts.variable_order.empty()) {
        std::vector<std::size_t> order(p);
        std::iota(order.begin(), order.end(), std::size_t{0});
        return order;
    }
    std::vector<std::size_t> sorted = opts.variable_order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (sorted[i] != i || sorted.size() != p)
            throw ValidationError("variable_order must be a permutation of the condition indices");
    return opts.variable_order;
}

void check_search_inputs(const SufficientStats& stats, const std::vector<std::string>& conditions) {
    if (conditions.empty()) throw ValidationError("structure search needs at least one condition");
    if (stats.n_conditions() != conditions.size())
        throw ValidationError("sufficient statistics and condition list disagree in size");
}

// Local score with candidate parent set; nullopt when the fit is singular or
// degenerate, making the corresponding move illegal.
std::optional<double> try_local(const SufficientStats& stats, std::size_t target_col,
                                const std::vector<std::size_t>& parent_cols, const PenaltyConfig& penalty) {
    try {
        return stats.local_score(target_col, parent_cols, penalty);
    } catch (const SingularityError&) {
        return std::nullopt;
    } catch (const DegenerateModelError&) {
        return std::nullopt;
    }
}

std::vector<std::size_t> with(std::vector<std::size_t> v, std::size_t x) {
    v.insert(std::upper_bound(v.begin(), v.end(), x), x);
    return v;
}

std::vector<std::size_t> without(std::vector<std::size_t> v, std::size_t x) {
    v.erase(std::remove(v.begin(), v.end(), x), v.end());
    return v;
}

class TwoSliceClimber {
public:
    TwoSliceClimber(const SufficientStats& stats, const PenaltyConfig& penalty, const SearchOptions& opts,
                    std::vector<std::size_t> order)
        : m_stats(stats), m_penalty(penalty), m_opts(opts), m_p(stats.n_conditions()), m_order(std::move(order)) {}

    bool can_add(const ArcSet& arcs, std::size_t to) const {
        return !m_opts.max_parents || arcs.parents(to).size() < *m_opts.max_parents;
    }

    std::optional<double> node_score(const ArcSet& arcs, std::size_t j) const {
        return try_local(m_stats, m_p + j, arcs.parents(j), m_penalty);
    }

    // Climbs in place; returns the final network score.
    double climb(ArcSet& arcs) const {
        std::vector<double> current(m_p);
        for (std::size_t j = 0; j < m_p; ++j) current[j] = m_stats.local_score(m_p + j, arcs.parents(j), m_penalty);

        // delta[from * p + to]: score change of toggling from@0 -> to@1.
        std::vector<double> delta(m_p * m_p, no_move);
        auto refresh = [&](std::size_t to) {
            const auto parents = arcs.parents(to);
            for (std::size_t from = 0; from < m_p; ++from) {
                double& d = delta[from * m_p + to];
                d = no_move;
                if (arcs.has(from, to)) {
                    if (auto s = try_local(m_stats, m_p + to, without(parents, from), m_penalty)) d = *s - current[to];
                } else if (can_add(arcs, to)) {
                    if (auto s = try_local(m_stats, m_p + to, with(parents, from), m_penalty)) d = *s - current[to];
                }
            }
        };
        for (std::size_t j = 0; j < m_p; ++j) refresh(j);

        for (;;) {
            double best = improvement_tolerance;
            std::optional<Arc> move;
            for (auto from : m_order)
                for (auto to : m_order) {
                    const double d = delta[from * m_p + to];
                    if (d > best) {
                        best = d;
                        move = Arc{from, to};
                    }
                }
            if (!move) break;
            arcs.set(move->from, move->to, !arcs.has(move->from, move->to));
            current[move->to] = m_stats.local_score(m_p + move->to, arcs.parents(move->to), m_penalty);
            refresh(move->to);
        }
        return std::accumulate(current.begin(), current.end(), 0.0);
    }

    void perturb(ArcSet& arcs, Rng& rng, std::size_t toggles) const {
        for (std::size_t t = 0; t < toggles; ++t) {
            const auto from = static_cast<std::size_t>(uniform_index(rng, m_p));
            const auto to = static_cast<std::size_t>(uniform_index(rng, m_p));
            const bool on = arcs.has(from, to);
            if (!on && !can_add(arcs, to)) continue;
            arcs.set(from, to, !on);
            if (!node_score(arcs, to)) arcs.set(from, to, on);
        }
    }

private:
    const SufficientStats& m_stats;
    const PenaltyConfig& m_penalty;
    const SearchOptions& m_opts;
    std::size_t m_p;
    std::vector<std::size_t> m_order;
};

class StaticClimber {
public:
    StaticClimber(const SufficientStats& stats, const PenaltyConfig& penalty, const SearchOptions& opts,
                  std::vector<std::size_t> order)
        : m_stats(stats), m_penalty(penalty), m_opts(opts), m_p(stats.n_conditions()), m_order(std::move(order)) {}

    std::optional<double> score(std::size_t j, const std::vector<std::size_t>& parents) const {
        std::vector<std::size_t> cols(parents);
        for (auto& c : cols) c += m_p;
        return try_local(m_stats, m_p + j, cols, m_penalty);
    }

    bool parents_ok(const StaticDag& dag, std::size_t to) const {
        return !m_opts.max_parents || dag.parents(to).size() < *m_opts.max_parents;
    }

    double climb(StaticDag& dag) const {
        std::vector<double> current(m_p);
        for (std::size_t j = 0; j < m_p; ++j) {
            auto s = score(j, dag.parents(j));
            if (!s) throw SingularityError("static search start graph cannot be scored");
            current[j] = *s;
        }
        enum class Kind { add, remove, reverse };
        for (;;) {
            double best = improvement_tolerance;
            std::optional<std::tuple<Kind, std::size_t, std::size_t>> move;
            auto consider = [&](double d, Kind k, std::size_t a, std::size_t b) {
                if (d > best) {
                    best = d;
                    move = std::make_tuple(k, a, b);
                }
            };
            for (auto from : m_order)
                for (auto to : m_order) {
                    if (from == to) continue;
                    if (dag.has_arc(from, to)) {
                        auto removed = score(to, without(dag.parents(to), from));
                        if (removed) consider(*removed - current[to], Kind::remove, from, to);
                        // Reverse: legal if no other directed path from -> to.
                        if (removed && parents_ok(dag, from)) {
                            StaticDag tmp = dag;
                            tmp.remove_arc(from, to);
                            if (!tmp.has_path(from, to)) {
                                if (auto gained = score(from, with(dag.parents(from), to)))
                                    consider(*removed - current[to] + *gained - current[from], Kind::reverse, from,
                                             to);
                            }
                        }
                    } else if (!dag.has_arc(to, from) && parents_ok(dag, to) && !dag.has_path(to, from)) {
                        if (auto added = score(to, with(dag.parents(to), from)))
                            consider(*added - current[to], Kind::add, from, to);
                    }
                }
            if (!move) break;
            auto [kind, from, to] = *move;
            switch (kind) {
                case Kind::add: dag.add_arc(from, to); break;
                case Kind::remove: dag.remove_arc(from, to); break;
                case Kind::reverse:
                    dag.remove_arc(from, to);
                    dag.add_arc(to, from);
                    break;
            }
            current[to] = *score(to, dag.parents(to));
            current[from] = *score(from, dag.parents(from));
        }
        return std::accumulate(current.begin(), current.end(), 0.0);
    }

    void perturb(StaticDag& dag, Rng& rng, std::size_t toggles) const {
        for (std::size_t t = 0; t < toggles; ++t) {
            const auto from = static_cast<std::size_t>(uniform_index(rng, m_p));
            const auto to = static_cast<std::size_t>(uniform_index(rng, m_p));
            if (from == to) continue;
            if (dag.has_arc(from, to)) {
                dag.remove_arc(from, to);
            } else if (!dag.would_create_cycle(from, to) && parents_ok(dag, to)) {
                dag.add_arc(from, to);
                if (!score(to, dag.parents(to))) dag.remove_arc(from, to);
            }
        }
    }

private:
    const SufficientStats& m_stats;
    const PenaltyConfig& m_penalty;
    const SearchOptions& m_opts;
    std::size_t m_p;
    std::vector<std::size_t> m_order;
};

}  // namespace

TwoSliceGraph hill_climb(const SufficientStats& stats, const std::vector<std::string>& conditions,
                         const PenaltyConfig& penalty, const SearchOptions& opts) {
    check_search_inputs(stats, conditions);
    if (opts.mode != SearchMode::two_slice) throw ValidationError("hill_climb expects two_slice mode");
    const std::size_t p = conditions.size();
    TwoSliceClimber climber(stats, penalty, opts, resolve_order(opts, p));

    ArcSet best(p);
    double best_score = climber.climb(best);
    const std::size_t toggles = opts.perturb > 0 ? opts.perturb : p;
    for (std::size_t r = 1; r <= opts.restarts; ++r) {
        auto rng = make_rng(opts.seed, r);
        ArcSet candidate = best;
        climber.perturb(candidate, rng, toggles);
        const double s = climber.climb(candidate);
        if (s > best_score + improvement_tolerance) {
            best_score = s;
            best = std::move(candidate);
        }
    }

    TwoSliceGraph graph(conditions);
    for (const auto& a : best.arcs()) graph.add_arc(a.from, a.to);
    return graph;
}

TwoSliceGraph hill_climb(const TransitionTable& data, const PenaltyConfig& penalty, const SearchOptions& opts) {
    if (data.n_conditions() == 0) throw ValidationError("structure search needs at least one condition");
    if (data.rows() == 0) throw InsufficientDataError("transition table is empty");
    return hill_climb(SufficientStats(data), data.conditions, penalty, opts);
}

StaticDag hill_climb_static(const SufficientStats& stats, const std::vector<std::string>& conditions,
                            const PenaltyConfig& penalty, const SearchOptions& opts) {
    check_search_inputs(stats, conditions);
    const std::size_t p = conditions.size();
    StaticClimber climber(stats, penalty, opts, resolve_order(opts, p));

    StaticDag best(conditions);
    double best_score = climber.climb(best);
    const std::size_t toggles = opts.perturb > 0 ? opts.perturb : p;
    for (std::size_t r = 1; r <= opts.restarts; ++r) {
        auto rng = make_rng(opts.seed, r);
        StaticDag candidate = best;
        climber.perturb(candidate, rng, toggles);
        const double s = climber.climb(candidate);
        if (s > best_score + improvement_tolerance) {
            best_score = s;
            best = std::move(candidate);
        }
    }
    return best;
}

StaticDag hill_climb_static(const TransitionTable& data, const PenaltyConfig& penalty, const SearchOptions& opts) {
    if (data.n_conditions() == 0) throw ValidationError("structure search needs at least one condition");
    if (data.rows() == 0) throw InsufficientDataError("transition table is empty");
    return hill_climb_static(SufficientStats(data), data.conditions, penalty, opts);
}

}  // namespace panelbn
