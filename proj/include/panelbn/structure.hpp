#ifndef PANELBN_STRUCTURE_HPP
#define PANELBN_STRUCTURE_HPP

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <panelbn/data_model.hpp>
#include <panelbn/gaussbn.hpp>

namespace panelbn {

/// Directed arc between condition indices. In a TwoSliceGraph it stands for
/// from@0 -> to@1; in a StaticDag for from -> to within one slice.
struct Arc {
    std::size_t from = 0;
    std::size_t to = 0;

    auto operator<=>(const Arc&) const = default;
    bool operator==(const Arc&) const = default;
};

/// Dense p x p arc indicator shared by the graph types.
class ArcSet {
public:
    ArcSet() = default;
    explicit ArcSet(std::size_t n) : m_n(n), m_bits(n * n, 0) {}

    std::size_t n() const { return m_n; }
    bool has(std::size_t from, std::size_t to) const { return m_bits[from * m_n + to] != 0; }
    void set(std::size_t from, std::size_t to, bool on) { m_bits[from * m_n + to] = on ? 1 : 0; }
    std::size_t size() const;
    /// Arcs in lexicographic (from, to) order.
    std::vector<Arc> arcs() const;
    /// Sources of arcs into `to`, ascending.
    std::vector<std::size_t> parents(std::size_t to) const;

    bool operator==(const ArcSet&) const = default;

private:
    std::size_t m_n = 0;
    std::vector<unsigned char> m_bits;
};

/// Two-slice DAG: arcs only point from slice 0 to slice 1, so every arc set
/// is acyclic. Self arcs X@0 -> X@1 model autocorrelation.
class TwoSliceGraph {
public:
    TwoSliceGraph() = default;
    explicit TwoSliceGraph(std::vector<std::string> conditions);

    const std::vector<std::string>& conditions() const { return m_conditions; }
    std::size_t n_conditions() const { return m_conditions.size(); }
    std::size_t condition_index(const std::string& name) const;

    void add_arc(std::size_t from, std::size_t to);
    /// Rejects anything that is not slice0 -> slice1.
    void add_arc(NodeRef from, NodeRef to);
    void remove_arc(std::size_t from, std::size_t to);
    bool has_arc(std::size_t from, std::size_t to) const { return m_arcs.has(from, to); }

    std::size_t n_arcs() const { return m_arcs.size(); }
    std::vector<Arc> arcs() const { return m_arcs.arcs(); }
    /// Slice-0 parents of condition@1 in canonical order.
    std::vector<NodeRef> parents(std::size_t condition) const;
    const ArcSet& arc_set() const { return m_arcs; }

    bool operator==(const TwoSliceGraph&) const = default;

private:
    void check(std::size_t from, std::size_t to) const;

    std::vector<std::string> m_conditions;
    ArcSet m_arcs;
};

/// Single-slice DAG over the conditions, used by the static comparison.
class StaticDag {
public:
    StaticDag() = default;
    explicit StaticDag(std::vector<std::string> conditions);

    const std::vector<std::string>& conditions() const { return m_conditions; }
    std::size_t n_conditions() const { return m_conditions.size(); }

    /// Throws ValidationError for self loops or arcs that would close a cycle.
    void add_arc(std::size_t from, std::size_t to);
    void remove_arc(std::size_t from, std::size_t to);
    bool has_arc(std::size_t from, std::size_t to) const { return m_arcs.has(from, to); }
    bool would_create_cycle(std::size_t from, std::size_t to) const;
    /// True if `to` is reachable from `from` along directed arcs.
    bool has_path(std::size_t from, std::size_t to) const;

    std::size_t n_arcs() const { return m_arcs.size(); }
    std::vector<Arc> arcs() const { return m_arcs.arcs(); }
    std::vector<std::size_t> parents(std::size_t node) const { return m_arcs.parents(node); }

    bool operator==(const StaticDag&) const = default;

private:
    std::vector<std::string> m_conditions;
    ArcSet m_arcs;
};

enum class EdgeKind { one_way, feedback, self_loop };

std::string to_string(EdgeKind kind);
EdgeKind parse_edge_kind(const std::string& name);

/// Folded edge. Feedback edges are stored once with from < to.
struct FoldedEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    EdgeKind kind = EdgeKind::one_way;

    auto operator<=>(const FoldedEdge&) const = default;
    bool operator==(const FoldedEdge&) const = default;
};

/// One node per condition; forward-in-time arc pairs become feedback loops.
class FoldedGraph {
public:
    FoldedGraph() = default;
    explicit FoldedGraph(std::vector<std::string> conditions);

    const std::vector<std::string>& conditions() const { return m_conditions; }
    std::size_t n_conditions() const { return m_conditions.size(); }

    /// Adds an edge, normalising feedback to from < to. Throws on conflicts
    /// such as a one-way edge in both directions.
    void add_edge(std::size_t from, std::size_t to, EdgeKind kind);
    const std::vector<FoldedEdge>& edges() const { return m_edges; }

    /// Kind of the relation between a and b as seen from a, if any:
    /// one_way means a -> b only.
    std::optional<EdgeKind> relation(std::size_t a, std::size_t b) const;

    bool operator==(const FoldedGraph&) const = default;

private:
    std::vector<std::string> m_conditions;
    std::vector<FoldedEdge> m_edges;  // kept sorted
};

FoldedGraph fold(const TwoSliceGraph& graph);
TwoSliceGraph unfold(const FoldedGraph& folded);

enum class SearchMode { two_slice, static_dag };

enum class TieBreak {
    lexicographic  // (from, to) in the search's variable order
};

struct SearchOptions {
    std::optional<std::size_t> max_parents;
    TieBreak tie_break = TieBreak::lexicographic;
    std::uint64_t seed = 0;
    std::size_t restarts = 0;
    /// Random arc toggles applied to the incumbent at each restart; 0 picks
    /// the number of conditions.
    std::size_t perturb = 0;
    SearchMode mode = SearchMode::two_slice;
    /// Permutation of condition indices defining the tie-break order; empty
    /// means canonical order.
    std::vector<std::size_t> variable_order;
};

inline constexpr double improvement_tolerance = 1e-9;

/// Penalised network score: sum over slice-1 nodes of local scores.
double network_score(const SufficientStats& stats, const TwoSliceGraph& graph, const PenaltyConfig& penalty);
double network_score(const TransitionTable& data, const TwoSliceGraph& graph, const PenaltyConfig& penalty);

/// Penalised score of a static DAG over the t1 columns of the data.
double network_score(const SufficientStats& stats, const StaticDag& dag, const PenaltyConfig& penalty);

/// Greedy hill climbing from the empty graph over single-arc additions and
/// deletions. Returns a graph where no legal move improves the score by more
/// than improvement_tolerance; with restarts, the best local optimum found.
TwoSliceGraph hill_climb(const TransitionTable& data, const PenaltyConfig& penalty, const SearchOptions& opts = {});
TwoSliceGraph hill_climb(const SufficientStats& stats, const std::vector<std::string>& conditions,
                         const PenaltyConfig& penalty, const SearchOptions& opts = {});

/// Static-BN counterpart: additions, deletions and reversals with
/// acyclicity checks, learned from the t1 columns as i.i.d. observations.
StaticDag hill_climb_static(const TransitionTable& data, const PenaltyConfig& penalty, const SearchOptions& opts = {});
StaticDag hill_climb_static(const SufficientStats& stats, const std::vector<std::string>& conditions,
                            const PenaltyConfig& penalty, const SearchOptions& opts = {});

}  // namespace panelbn

#endif  // PANELBN_STRUCTURE_HPP
