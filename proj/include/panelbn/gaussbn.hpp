#ifndef PANELBN_GAUSSBN_HPP
#define PANELBN_GAUSSBN_HPP

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <panelbn/data_model.hpp>

namespace panelbn {

enum class Slice : std::uint8_t { t0 = 0, t1 = 1 };

/// A condition at one of the two time slices. `condition` indexes the
/// canonical condition order of the data the node belongs to.
struct NodeRef {
    std::size_t condition = 0;
    Slice slice = Slice::t1;

    auto operator<=>(const NodeRef&) const = default;
    bool operator==(const NodeRef&) const = default;
};

inline NodeRef at_t0(std::size_t condition) { return {condition, Slice::t0}; }
inline NodeRef at_t1(std::size_t condition) { return {condition, Slice::t1}; }

/// Linear-Gaussian local distribution:
///   target = intercept + parents . coefficients + N(0, residual_variance)
struct GaussianNodeModel {
    NodeRef target;
    std::vector<NodeRef> parents;
    double intercept = 0.0;
    Eigen::VectorXd coefficients;
    double residual_variance = 0.0;

    double mean(const Eigen::Ref<const Eigen::RowVectorXd>& parent_values) const;
};

enum class PenaltyConvention {
    bic_half,      // w * log(n) / 2 per parameter; w = 1 is BIC
    paper_literal  // w * log(n) per parameter
};

PenaltyConvention parse_penalty_convention(const std::string& name);
std::string to_string(PenaltyConvention c);

struct PenaltyConfig {
    double w = 1.0;
    PenaltyConvention convention = PenaltyConvention::bic_half;

    /// Penalty per free parameter for a sample of size n.
    double per_parameter(double n) const;
};

inline constexpr double min_residual_variance = 1e-12;

/// Parameters of a node with the given parents: intercept, one coefficient
/// per parent, residual variance.
inline std::size_t parameter_count(std::size_t n_parents) { return n_parents + 2; }

/// Maximum-likelihood fit by column-pivoted Householder QR on the centred
/// design. residual_variance = RSS / n.
GaussianNodeModel fit_node(NodeRef target, std::span<const NodeRef> parents, const TransitionTable& data);

double node_loglik(const GaussianNodeModel& model, const TransitionTable& data);

double score_node(NodeRef target, std::span<const NodeRef> parents, const TransitionTable& data,
                  const PenaltyConfig& penalty);

/// Gaussian log-likelihood of an MLE fit with residual sum of squares `rss`
/// over n observations.
double mle_loglik(double rss, double n);

/// Centred cross-products of the stacked columns [x0 | x1] of a transition
/// table. Column c < p is condition c at t0, column p + c is condition c at
/// t1. Every least-squares fit among these columns can be scored from this
/// summary in O(k^3) for k parents, independent of the number of rows.
class SufficientStats {
public:
    explicit SufficientStats(const TransitionTable& data);

    /// Rows weighted by non-negative multiplicities (bootstrap counts).
    SufficientStats(const TransitionTable& data, std::span<const double> weights);

    std::size_t n_conditions() const { return m_conditions; }
    double n() const { return m_n; }

    static std::size_t column(NodeRef node, std::size_t n_conditions) {
        return node.slice == Slice::t0 ? node.condition : n_conditions + node.condition;
    }
    std::size_t column(NodeRef node) const { return column(node, m_conditions); }

    double mean(std::size_t col) const { return m_mean(static_cast<Eigen::Index>(col)); }
    double centered_ss(std::size_t col) const {
        auto c = static_cast<Eigen::Index>(col);
        return m_cross(c, c);
    }

    /// Residual sum of squares of the least-squares regression of `target`
    /// on `parents` (stats columns) plus an intercept. Throws SingularityError
    /// on collinear or constant parents.
    double rss(std::size_t target, std::span<const std::size_t> parents) const;

    /// log L - penalty for the MLE fit. Throws DegenerateModelError when the
    /// residual variance falls below min_residual_variance.
    double local_score(std::size_t target, std::span<const std::size_t> parents, const PenaltyConfig& penalty) const;

private:
    void build(const Eigen::MatrixXd& z, const Eigen::VectorXd* weights);

    std::size_t m_conditions = 0;
    double m_n = 0.0;
    Eigen::VectorXd m_mean;
    Eigen::MatrixXd m_cross;
};

}  // namespace panelbn

#endif  // PANELBN_GAUSSBN_HPP
