#ifndef PANELBN_ANALYSIS_HPP
#define PANELBN_ANALYSIS_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <panelbn/averaging.hpp>
#include <panelbn/data_model.hpp>
#include <panelbn/gaussbn.hpp>
#include <panelbn/structure.hpp>

namespace panelbn {

/// Two-slice structure plus one fitted linear-Gaussian model per slice-1
/// node, indexed by condition.
class DynamicBN {
public:
    DynamicBN() = default;
    DynamicBN(TwoSliceGraph graph, std::vector<GaussianNodeModel> nodes);

    const TwoSliceGraph& graph() const { return m_graph; }
    const std::vector<std::string>& conditions() const { return m_graph.conditions(); }
    std::size_t n_conditions() const { return m_graph.n_conditions(); }
    const GaussianNodeModel& node(std::size_t condition) const { return m_nodes.at(condition); }
    const std::vector<GaussianNodeModel>& nodes() const { return m_nodes; }

    /// Lag-1 coefficient matrix B with B(to, from) = coefficient of from@0 in to@1.
    Eigen::MatrixXd coefficient_matrix() const;
    Eigen::VectorXd intercepts() const;
    Eigen::VectorXd residual_variances() const;

    /// Conditional means of slice 1 given a slice-0 vector.
    Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x0) const;

    bool operator==(const DynamicBN& other) const;

private:
    TwoSliceGraph m_graph;
    std::vector<GaussianNodeModel> m_nodes;
};

DynamicBN fit_parameters(const TwoSliceGraph& graph, const TransitionTable& data);

/// 1 - RSS/TSS of the model's predictions on `data`, with TSS taken around
/// the table's own mean of the target.
double r_squared(const DynamicBN& dbn, const TransitionTable& data, std::size_t target);
double mean_r_squared(const DynamicBN& dbn, const TransitionTable& data);

struct VarianceShare {
    std::size_t parent = 0;
    bool self = false;
    double sum_of_squares = 0.0;
    double raw_share = 0.0;         // SS / TSS
    double normalized_share = 0.0;  // SS / sum of non-self SS; 0 for self
};

struct VarianceDecomposition {
    std::size_t target = 0;
    std::vector<VarianceShare> entries;  // in entry order
    bool self_excluded = true;
    double total_ss = 0.0;
    double model_ss = 0.0;
};

/// Parent entry order for sequential sums of squares: the self lag first,
/// then the other parents by decreasing arc strength (lexicographic on ties,
/// or canonical order without a strength table).
std::vector<std::size_t> entry_order(const std::vector<std::size_t>& parents, std::size_t target,
                                     const ArcStrengthTable* strengths);

/// Type-I ANOVA of the target's slice-1 values on its model parents,
/// refitted by least squares on `data`.
VarianceDecomposition variance_decomposition(const DynamicBN& dbn, const TransitionTable& data, std::size_t target,
                                             const ArcStrengthTable* strengths = nullptr);

struct PenaltyTuningRow {
    double w = 0.0;
    double train_r2 = 0.0;
    double validation_r2 = 0.0;
    std::size_t arcs = 0;
};

inline const std::vector<double> default_w_grid{1, 2, 4, 8, 16, 32, 64, 128};
inline constexpr std::size_t default_split_week = 52;

/// Learns a structure and parameters on transitions entirely within the
/// first `split_week` weeks for every w, and reports mean R^2 across
/// conditions there and on transitions starting at or after split_week.
/// The transition straddling the split is used by neither side.
std::vector<PenaltyTuningRow> tune_penalty(const PanelDataset& panel, std::size_t split_week,
                                           std::span<const double> w_grid,
                                           PenaltyConvention convention = PenaltyConvention::bic_half,
                                           const SearchOptions& opts = {}, std::size_t threads = 1);

struct ConditionComponents {
    std::string condition;
    double state_share = 0.0;
    double county_share = 0.0;
    double county_plus_ar_share = 0.0;
    double ar_coefficient = 0.0;
};

struct VarianceComponents {
    std::vector<ConditionComponents> conditions;

    double mean_state_share() const;
    double mean_county_share() const;
    double mean_county_plus_ar_share() const;
};

/// Method-of-moments proportions of variance explained by state means,
/// county means, and county means plus a pooled lag-1 autoregression.
VarianceComponents variance_components(const PanelDataset& panel);

/// County-demeaned lag-1 AR residuals per condition; the first covered week
/// of each region is dropped.
PanelDataset detrend(const PanelDataset& panel);

struct StaticComparison {
    std::size_t correct = 0;
    std::size_t feedback = 0;
    std::size_t reversed = 0;
    std::size_t spurious = 0;

    std::size_t total() const { return correct + feedback + reversed + spurious; }
    double proportion(std::size_t count) const {
        return total() == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(total());
    }
};

/// Classifies every static arc X -> Y against the folded dynamic graph.
StaticComparison compare_static(const StaticDag& static_dag, const FoldedGraph& dynamic);

enum class StratifyMethod {
    restricted_regression,  // refit on observed rows in each stratum
    simulation              // replace the target by draws from the fitted model first
};

struct StratumSpec {
    std::size_t stratifier = 0;
    StratifyMethod method = StratifyMethod::restricted_regression;
    std::uint64_t seed = 0;  // simulation only
};

struct StratifiedShares {
    double unstratified = 0.0;
    double low = 0.0;
    double average = 0.0;
    double high = 0.0;
    std::size_t n_low = 0;
    std::size_t n_average = 0;
    std::size_t n_high = 0;
    double q1 = 0.0;
    double q3 = 0.0;
};

/// Linear-interpolation empirical quantile (numpy "linear", R type 7).
double empirical_quantile(std::vector<double> values, double prob);

/// Driver's sequential sum of squares as a fraction of the target's total
/// explained sum of squares (self lag included), overall and within the
/// quartile strata of the stratifier's slice-0 values. Boundary values go to
/// the lower stratum.
StratifiedShares stratified_share(const DynamicBN& dbn, const TransitionTable& data, std::size_t target,
                                  std::size_t driver, const StratumSpec& stratum,
                                  const ArcStrengthTable* strengths = nullptr);

}  // namespace panelbn

#endif  // PANELBN_ANALYSIS_HPP
