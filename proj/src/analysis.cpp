#include <panelbn/analysis.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <panelbn/error.hpp>
#include <panelbn/parallel.hpp>
#include <panelbn/random.hpp>

namespace panelbn {

DynamicBN::DynamicBN(TwoSliceGraph graph, std::vector<GaussianNodeModel> nodes)
    : m_graph(std::move(graph)), m_nodes(std::move(nodes)) {
    if (m_nodes.size() != m_graph.n_conditions())
        throw ValidationError("a dynamic BN needs exactly one node model per condition");
    for (std::size_t j = 0; j < m_nodes.size(); ++j) {
        const auto& node = m_nodes[j];
        if (node.target != at_t1(j)) throw ValidationError("node models must be ordered by condition at slice 1");
        if (node.parents != m_graph.parents(j))
            throw ValidationError("node model parents of " + m_graph.conditions()[j] + " disagree with the graph");
        if (node.coefficients.size() != static_cast<Eigen::Index>(node.parents.size()))
            throw ValidationError("coefficient count mismatch for " + m_graph.conditions()[j]);
        if (!(node.residual_variance >= 0.0)) throw ValidationError("residual variance must be >= 0");
    }
}

Eigen::MatrixXd DynamicBN::coefficient_matrix() const {
    const auto p = static_cast<Eigen::Index>(n_conditions());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t j = 0; j < m_nodes.size(); ++j)
        for (std::size_t k = 0; k < m_nodes[j].parents.size(); ++k)
            b(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m_nodes[j].parents[k].condition)) =
                m_nodes[j].coefficients(static_cast<Eigen::Index>(k));
    return b;
}

Eigen::VectorXd DynamicBN::intercepts() const {
    Eigen::VectorXd mu(static_cast<Eigen::Index>(n_conditions()));
    for (std::size_t j = 0; j < m_nodes.size(); ++j) mu(static_cast<Eigen::Index>(j)) = m_nodes[j].intercept;
    return mu;
}

Eigen::VectorXd DynamicBN::residual_variances() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n_conditions()));
    for (std::size_t j = 0; j < m_nodes.size(); ++j) v(static_cast<Eigen::Index>(j)) = m_nodes[j].residual_variance;
    return v;
}

Eigen::VectorXd DynamicBN::predict(const Eigen::Ref<const Eigen::VectorXd>& x0) const {
    return intercepts() + coefficient_matrix() * x0;
}

bool DynamicBN::operator==(const DynamicBN& other) const {
    if (!(m_graph == other.m_graph) || m_nodes.size() != other.m_nodes.size()) return false;
    for (std::size_t j = 0; j < m_nodes.size(); ++j) {
        const auto& a = m_nodes[j];
        const auto& b = other.m_nodes[j];
        if (a.target != b.target || a.parents != b.parents || a.intercept != b.intercept ||
            a.coefficients != b.coefficients || a.residual_variance != b.residual_variance)
            return false;
    }
    return true;
}

DynamicBN fit_parameters(const TwoSliceGraph& graph, const TransitionTable& data) {
    if (data.rows() == 0) throw InsufficientDataError("transition table is empty");
    if (graph.conditions() != data.conditions)
        throw ValidationError("graph and data must share the same condition order");
    std::vector<GaussianNodeModel> nodes;
    nodes.reserve(graph.n_conditions());
    for (std::size_t j = 0; j < graph.n_conditions(); ++j) {
        auto parents = graph.parents(j);
        try {
            nodes.push_back(fit_node(at_t1(j), parents, data));
        } catch (const SingularityError& e) {
            throw SingularityError("fitting " + graph.conditions()[j] + ": " + e.what());
        } catch (const InsufficientDataError& e) {
            throw InsufficientDataError("fitting " + graph.conditions()[j] + ": " + e.what());
        }
    }
    return DynamicBN(graph, std::move(nodes));
}

double r_squared(const DynamicBN& dbn, const TransitionTable& data, std::size_t target) {
    if (target >= dbn.n_conditions()) throw ValidationError("target condition out of range");
    if (dbn.conditions() != data.conditions) throw ValidationError("model and data disagree on conditions");
    const auto& node = dbn.node(target);
    const auto t = static_cast<Eigen::Index>(target);
    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(data.x1.rows(), node.intercept);
    for (std::size_t k = 0; k < node.parents.size(); ++k)
        fitted += node.coefficients(static_cast<Eigen::Index>(k)) *
                  data.x0.col(static_cast<Eigen::Index>(node.parents[k].condition));
    const auto y = data.x1.col(t);
    const double tss = (y.array() - y.mean()).square().sum();
    if (!(tss > 0.0)) throw DegenerateModelError("R^2 undefined for " + dbn.conditions()[target] + ": zero total variance");
    return 1.0 - (y - fitted).squaredNorm() / tss;
}

double mean_r_squared(const DynamicBN& dbn, const TransitionTable& data) {
    double total = 0.0;
    for (std::size_t j = 0; j < dbn.n_conditions(); ++j) total += r_squared(dbn, data, j);
    return total / static_cast<double>(dbn.n_conditions());
}

std::vector<std::size_t> entry_order(const std::vector<std::size_t>& parents, std::size_t target,
                                     const ArcStrengthTable* strengths) {
    std::vector<std::size_t> others;
    bool has_self = false;
    for (auto p : parents) {
        if (p == target) {
            has_self = true;
        } else {
            others.push_back(p);
        }
    }
    std::sort(others.begin(), others.end());
    if (strengths) {
        std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
            return strengths->strength(a, target) > strengths->strength(b, target);
        });
    }
    std::vector<std::size_t> order;
    if (has_self) order.push_back(target);
    order.insert(order.end(), others.begin(), others.end());
    return order;
}

namespace {

struct SequentialSS {
    std::vector<double> ss;  // per entry
    double total_ss = 0.0;
    double model_ss = 0.0;
};

SequentialSS sequential_ss(const SufficientStats& stats, std::size_t target, const std::vector<std::size_t>& order) {
    const std::size_t p = stats.n_conditions();
    const std::size_t target_col = p + target;
    SequentialSS out;
    out.total_ss = stats.centered_ss(target_col);
    std::vector<std::size_t> cols;
    double previous = out.total_ss;
    for (auto parent : order) {
        cols.push_back(parent);
        const double rss = stats.rss(target_col, cols);
        out.ss.push_back(std::max(previous - rss, 0.0));
        previous = rss;
    }
    out.model_ss = out.total_ss - previous;
    return out;
}

std::vector<std::size_t> parent_conditions(const GaussianNodeModel& node) {
    std::vector<std::size_t> out;
    for (const auto& p : node.parents) out.push_back(p.condition);
    return out;
}

}  // namespace

VarianceDecomposition variance_decomposition(const DynamicBN& dbn, const TransitionTable& data, std::size_t target,
                                             const ArcStrengthTable* strengths) {
    if (target >= dbn.n_conditions()) throw ValidationError("target condition out of range");
    if (dbn.conditions() != data.conditions) throw ValidationError("model and data disagree on conditions");
    const auto parents = parent_conditions(dbn.node(target));
    if (parents.empty())
        throw EmptyModelError("variance decomposition of " + dbn.conditions()[target] + " needs at least one parent");
    SufficientStats stats(data);
    const auto order = entry_order(parents, target, strengths);
    const auto seq = sequential_ss(stats, target, order);
    if (!(seq.total_ss > 0.0)) throw DegenerateModelError("target " + dbn.conditions()[target] + " has zero variance");

    double non_self = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k)
        if (order[k] != target) non_self += seq.ss[k];

    VarianceDecomposition out;
    out.target = target;
    out.total_ss = seq.total_ss;
    out.model_ss = seq.model_ss;
    out.self_excluded = true;
    for (std::size_t k = 0; k < order.size(); ++k) {
        VarianceShare share;
        share.parent = order[k];
        share.self = order[k] == target;
        share.sum_of_squares = seq.ss[k];
        share.raw_share = seq.ss[k] / seq.total_ss;
        share.normalized_share = (!share.self && non_self > 0.0) ? seq.ss[k] / non_self : 0.0;
        out.entries.push_back(share);
    }
    return out;
}

std::vector<PenaltyTuningRow> tune_penalty(const PanelDataset& panel, std::size_t split_week,
                                           std::span<const double> w_grid, PenaltyConvention convention,
                                           const SearchOptions& opts, std::size_t threads) {
    if (split_week < 2 || split_week + 2 > panel.n_weeks())
        throw ValidationError("split week " + std::to_string(split_week) + " must leave at least two weeks on each side of " +
                              std::to_string(panel.n_weeks()) + " weeks");
    if (w_grid.empty()) throw ValidationError("penalty grid is empty");
    const auto table = make_transition_table(panel);
    std::vector<std::size_t> train_rows, validation_rows;
    for (std::size_t i = 0; i < table.rows(); ++i) {
        if (table.row_week[i] < split_week) {
            train_rows.push_back(i);
        } else if (table.row_week[i] > split_week) {
            validation_rows.push_back(i);
        }
    }
    if (train_rows.empty() || validation_rows.empty())
        throw ValidationError("split leaves no transitions on one side");
    const auto train = table.subset(train_rows);
    const auto validation = table.subset(validation_rows);
    const SufficientStats train_stats(train);

    std::vector<PenaltyTuningRow> rows(w_grid.size());
    parallel_for(w_grid.size(), threads, [&](std::size_t i) {
        const PenaltyConfig penalty{w_grid[i], convention};
        auto graph = hill_climb(train_stats, train.conditions, penalty, opts);
        auto dbn = fit_parameters(graph, train);
        rows[i] = {w_grid[i], mean_r_squared(dbn, train), mean_r_squared(dbn, validation), graph.n_arcs()};
    });
    return rows;
}

namespace {

double mean_of(const std::vector<ConditionComponents>& v, double ConditionComponents::*field) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (const auto& c : v) s += c.*field;
    return s / static_cast<double>(v.size());
}

struct CountyResiduals {
    double rho = 0.0;
    double total_ss = 0.0;
    double state_ss = 0.0;
    double county_ss = 0.0;
    double ar_residual_ss = 0.0;
    std::vector<double> county_mean;
};

CountyResiduals county_ar(const PanelDataset& panel, std::size_t c) {
    CountyResiduals out;
    out.county_mean.assign(panel.n_regions(), 0.0);
    std::vector<std::size_t> county_n(panel.n_regions(), 0);
    std::map<std::string, std::pair<double, std::size_t>> state_acc;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < panel.n_regions(); ++r) {
        const auto& cov = panel.coverage(r);
        for (std::size_t w = cov.first; w < cov.last; ++w) {
            const double v = panel.value(c, r, w);
            if (is_missing(v)) continue;
            out.county_mean[r] += v;
            ++county_n[r];
            auto& acc = state_acc[panel.regions()[r].state];
            acc.first += v;
            ++acc.second;
            sum += v;
            ++n;
        }
    }
    if (n == 0) throw InsufficientDataError("condition " + panel.conditions()[c] + " has no observations");
    const double grand = sum / static_cast<double>(n);
    for (std::size_t r = 0; r < panel.n_regions(); ++r)
        if (county_n[r] > 0) out.county_mean[r] /= static_cast<double>(county_n[r]);

    double lag_xy = 0.0, lag_xx = 0.0;
    for (std::size_t r = 0; r < panel.n_regions(); ++r) {
        const auto& cov = panel.coverage(r);
        const auto& acc = state_acc[panel.regions()[r].state];
        const double state_mean = acc.first / static_cast<double>(acc.second);
        for (std::size_t w = cov.first; w < cov.last; ++w) {
            const double v = panel.value(c, r, w);
            if (is_missing(v)) continue;
            out.total_ss += (v - grand) * (v - grand);
            out.state_ss += (state_mean - grand) * (state_mean - grand);
            out.county_ss += (out.county_mean[r] - grand) * (out.county_mean[r] - grand);
            if (w > cov.first && !is_missing(panel.value(c, r, w - 1))) {
                const double prev = panel.value(c, r, w - 1) - out.county_mean[r];
                lag_xy += prev * (v - out.county_mean[r]);
                lag_xx += prev * prev;
            }
        }
    }
    out.rho = lag_xx > 0.0 ? lag_xy / lag_xx : 0.0;
    for (std::size_t r = 0; r < panel.n_regions(); ++r) {
        const auto& cov = panel.coverage(r);
        for (std::size_t w = cov.first; w < cov.last; ++w) {
            const double v = panel.value(c, r, w);
            if (is_missing(v)) continue;
            double e = v - out.county_mean[r];
            if (w > cov.first && !is_missing(panel.value(c, r, w - 1)))
                e -= out.rho * (panel.value(c, r, w - 1) - out.county_mean[r]);
            out.ar_residual_ss += e * e;
        }
    }
    return out;
}

}  // namespace

double VarianceComponents::mean_state_share() const { return mean_of(conditions, &ConditionComponents::state_share); }
double VarianceComponents::mean_county_share() const { return mean_of(conditions, &ConditionComponents::county_share); }
double VarianceComponents::mean_county_plus_ar_share() const {
    return mean_of(conditions, &ConditionComponents::county_plus_ar_share);
}

VarianceComponents variance_components(const PanelDataset& panel) {
    std::map<std::string, std::size_t> per_state;
    for (const auto& r : panel.regions()) ++per_state[r.state];
    if (per_state.size() < 2) throw ValidationError("variance components need at least two states");
    if (std::none_of(per_state.begin(), per_state.end(), [](const auto& kv) { return kv.second >= 2; }))
        throw ValidationError("variance components need a state with at least two counties");
    if (panel.n_weeks() < 3) throw ValidationError("variance components need at least three weeks");

    VarianceComponents out;
    for (std::size_t c = 0; c < panel.n_conditions(); ++c) {
        const auto acc = county_ar(panel, c);
        if (!(acc.total_ss > 0.0))
            throw DegenerateModelError("condition " + panel.conditions()[c] + " has zero variance");
        ConditionComponents comp;
        comp.condition = panel.conditions()[c];
        comp.state_share = std::clamp(acc.state_ss / acc.total_ss, 0.0, 1.0);
        comp.county_share = std::clamp(acc.county_ss / acc.total_ss, 0.0, 1.0);
        comp.county_plus_ar_share =
            std::clamp(std::max(1.0 - acc.ar_residual_ss / acc.total_ss, comp.county_share), 0.0, 1.0);
        comp.ar_coefficient = acc.rho;
        out.conditions.push_back(comp);
    }
    return out;
}

PanelDataset detrend(const PanelDataset& panel) {
    if (!panel.complete()) throw PreconditionError("detrend requires a complete panel");
    std::size_t first_week = panel.n_weeks();
    for (std::size_t r = 0; r < panel.n_regions(); ++r)
        if (panel.coverage(r).size() > 1) first_week = std::min(first_week, panel.coverage(r).first + 1);
    if (first_week >= panel.n_weeks()) throw InsufficientDataError("detrend needs regions with at least two weeks");

    std::vector<Date> weeks(panel.weeks().begin() + static_cast<std::ptrdiff_t>(first_week), panel.weeks().end());
    PanelDataset out(panel.regions(), weeks, panel.conditions());
    for (std::size_t r = 0; r < panel.n_regions(); ++r) {
        const auto& cov = panel.coverage(r);
        if (cov.size() < 2) {
            out.set_coverage(r, {0, 0});
            continue;
        }
        out.set_coverage(r, {cov.first + 1 - first_week, cov.last - first_week});
    }
    for (std::size_t c = 0; c < panel.n_conditions(); ++c) {
        const auto acc = county_ar(panel, c);
        for (std::size_t r = 0; r < panel.n_regions(); ++r) {
            const auto& cov = panel.coverage(r);
            if (cov.size() < 2) continue;
            const double m = acc.county_mean[r];
            for (std::size_t w = cov.first + 1; w < cov.last; ++w) {
                const double e = (panel.value(c, r, w) - m) - acc.rho * (panel.value(c, r, w - 1) - m);
                out.set_value(c, r, w - first_week, e);
            }
        }
    }
    return out;
}

StaticComparison compare_static(const StaticDag& static_dag, const FoldedGraph& dynamic) {
    if (static_dag.conditions() != dynamic.conditions())
        throw ValidationError("static and dynamic graphs must be over the same conditions");
    StaticComparison out;
    for (const auto& arc : static_dag.arcs()) {
        const auto forward = dynamic.relation(arc.from, arc.to);
        if (forward == EdgeKind::feedback) {
            ++out.feedback;
        } else if (forward == EdgeKind::one_way) {
            ++out.correct;
        } else if (dynamic.relation(arc.to, arc.from) == EdgeKind::one_way) {
            ++out.reversed;
        } else {
            ++out.spurious;
        }
    }
    return out;
}

double empirical_quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw ValidationError("quantile of an empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw ValidationError("quantile probability must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = prob * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

double driver_share(const TransitionTable& data, std::span<const double> weights, std::size_t target,
                    std::size_t driver, const std::vector<std::size_t>& order, const std::string& stratum) {
    double rows = 0.0;
    for (double w : weights) rows += w;
    if (rows < static_cast<double>(order.size() + 2))
        throw InsufficientDataError("stratum '" + stratum + "' has " + std::to_string(static_cast<std::size_t>(rows)) +
                                    " rows, fewer than parents + 2 = " + std::to_string(order.size() + 2));
    SufficientStats stats(data, weights);
    const auto seq = sequential_ss(stats, target, order);
    if (!(seq.model_ss > 0.0)) return 0.0;
    for (std::size_t k = 0; k < order.size(); ++k)
        if (order[k] == driver) return seq.ss[k] / seq.model_ss;
    return 0.0;
}

}  // namespace

StratifiedShares stratified_share(const DynamicBN& dbn, const TransitionTable& data, std::size_t target,
                                  std::size_t driver, const StratumSpec& stratum, const ArcStrengthTable* strengths) {
    const std::size_t p = dbn.n_conditions();
    if (target >= p || driver >= p || stratum.stratifier >= p)
        throw ValidationError("target, driver and stratifier must be conditions of the model");
    if (dbn.conditions() != data.conditions) throw ValidationError("model and data disagree on conditions");
    const auto parents = parent_conditions(dbn.node(target));
    if (std::find(parents.begin(), parents.end(), driver) == parents.end())
        throw ValidationError(dbn.conditions()[driver] + " is not a parent of " + dbn.conditions()[target]);
    const auto order = entry_order(parents, target, strengths);

    const TransitionTable* table = &data;
    TransitionTable simulated;
    if (stratum.method == StratifyMethod::simulation) {
        simulated = data;
        const auto& node = dbn.node(target);
        const double sd = std::sqrt(node.residual_variance);
        Rng rng(derive_seed(stratum.seed, target));
        for (Eigen::Index i = 0; i < data.x0.rows(); ++i) {
            double mean = node.intercept;
            for (std::size_t k = 0; k < node.parents.size(); ++k)
                mean += node.coefficients(static_cast<Eigen::Index>(k)) *
                        data.x0(i, static_cast<Eigen::Index>(node.parents[k].condition));
            simulated.x1(i, static_cast<Eigen::Index>(target)) = mean + sd * standard_normal(rng);
        }
        table = &simulated;
    }

    const auto s_col = data.x0.col(static_cast<Eigen::Index>(stratum.stratifier));
    std::vector<double> values(s_col.data(), s_col.data() + s_col.size());
    StratifiedShares out;
    out.q1 = empirical_quantile(values, 0.25);
    out.q3 = empirical_quantile(values, 0.75);

    const std::size_t n = data.rows();
    std::vector<double> all(n, 1.0), low(n, 0.0), avg(n, 0.0), high(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = values[i];
        if (v <= out.q1) {
            low[i] = 1.0;
            ++out.n_low;
        } else if (v <= out.q3) {
            avg[i] = 1.0;
            ++out.n_average;
        } else {
            high[i] = 1.0;
            ++out.n_high;
        }
    }
    out.unstratified = driver_share(*table, all, target, driver, order, "all");
    out.low = driver_share(*table, low, target, driver, order, "low");
    out.average = driver_share(*table, avg, target, driver, order, "average");
    out.high = driver_share(*table, high, target, driver, order, "high");
    return out;
}

}  // namespace panelbn
