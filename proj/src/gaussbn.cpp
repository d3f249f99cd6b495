#include <panelbn/gaussbn.hpp>

#include <cmath>
#include <numbers>

#include <panelbn/error.hpp>

namespace panelbn {

namespace {

constexpr double rank_tolerance = 1e-10;

std::string node_name(NodeRef node, const std::vector<std::string>& conditions) {
    std::string name = node.condition < conditions.size() ? conditions[node.condition]
                                                          : "#" + std::to_string(node.condition);
    return name + (node.slice == Slice::t0 ? "@0" : "@1");
}

Eigen::Ref<const Eigen::VectorXd> column_of(const TransitionTable& data, NodeRef node) {
    if (node.condition >= data.n_conditions())
        throw ValidationError("node refers to condition index " + std::to_string(node.condition) + " but the data has " +
                              std::to_string(data.n_conditions()) + " conditions");
    auto c = static_cast<Eigen::Index>(node.condition);
    return node.slice == Slice::t0 ? data.x0.col(c) : data.x1.col(c);
}

void check_parents(NodeRef target, std::span<const NodeRef> parents, const TransitionTable& data) {
    if (target.slice == Slice::t0 && !parents.empty())
        throw ValidationError("slice-0 node " + node_name(target, data.conditions) + " cannot have parents");
    for (const auto& p : parents)
        if (p.slice != Slice::t0)
            throw ValidationError("parent " + node_name(p, data.conditions) + " of " +
                                  node_name(target, data.conditions) + " must lie in slice 0");
}

}  // namespace

double GaussianNodeModel::mean(const Eigen::Ref<const Eigen::RowVectorXd>& parent_values) const {
    return intercept + parent_values.dot(coefficients);
}

PenaltyConvention parse_penalty_convention(const std::string& name) {
    if (name == "bic_half") return PenaltyConvention::bic_half;
    if (name == "paper_literal") return PenaltyConvention::paper_literal;
    throw ValidationError("unknown penalty convention '" + name + "' (expected bic_half or paper_literal)");
}

std::string to_string(PenaltyConvention c) {
    return c == PenaltyConvention::bic_half ? "bic_half" : "paper_literal";
}

double PenaltyConfig::per_parameter(double n) const {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("penalty coefficient w must be finite and >= 0");
    const double kappa = convention == PenaltyConvention::bic_half ? std::log(n) / 2.0 : std::log(n);
    return w * kappa;
}

double mle_loglik(double rss, double n) {
    const double variance = rss / n;
    if (!(variance >= min_residual_variance))
        throw DegenerateModelError("residual variance " + std::to_string(variance) +
                                   " is below the degeneracy floor; perfect fits are rejected");
    return -0.5 * n * (std::log(2.0 * std::numbers::pi * variance) + 1.0);
}

GaussianNodeModel fit_node(NodeRef target, std::span<const NodeRef> parents, const TransitionTable& data) {
    check_parents(target, parents, data);
    const auto n = static_cast<Eigen::Index>(data.rows());
    const auto k = static_cast<Eigen::Index>(parents.size());
    if (data.rows() < parents.size() + 2)
        throw InsufficientDataError("fitting " + node_name(target, data.conditions) + " with " +
                                    std::to_string(parents.size()) + " parents needs at least " +
                                    std::to_string(parents.size() + 2) + " rows, got " + std::to_string(data.rows()));

    Eigen::VectorXd y = column_of(data, target);
    const double y_mean = y.mean();
    y.array() -= y_mean;

    GaussianNodeModel model;
    model.target = target;
    model.parents.assign(parents.begin(), parents.end());
    model.coefficients = Eigen::VectorXd::Zero(k);

    if (k == 0) {
        model.intercept = y_mean;
        model.residual_variance = y.squaredNorm() / static_cast<double>(n);
        return model;
    }

    Eigen::MatrixXd x(n, k);
    Eigen::VectorXd x_mean(k), scale(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        x.col(j) = column_of(data, parents[static_cast<std::size_t>(j)]);
        x_mean(j) = x.col(j).mean();
        x.col(j).array() -= x_mean(j);
        scale(j) = x.col(j).norm();
        if (!(scale(j) > 0.0))
            throw SingularityError("parent " + node_name(parents[static_cast<std::size_t>(j)], data.conditions) +
                                   " of " + node_name(target, data.conditions) +
                                   " is constant and collinear with the intercept");
        x.col(j) /= scale(j);
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(rank_tolerance);
    if (qr.rank() < k) {
        std::string names;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index j = qr.rank(); j < k; ++j) {
            if (!names.empty()) names += ", ";
            names += node_name(parents[static_cast<std::size_t>(perm(j))], data.conditions);
        }
        throw SingularityError("rank-deficient design for " + node_name(target, data.conditions) +
                               ": collinear parents " + names);
    }
    Eigen::VectorXd beta = qr.solve(y);
    beta.array() /= scale.array();
    const Eigen::VectorXd residual = y - (x * scale.asDiagonal()) * beta;

    model.coefficients = beta;
    model.intercept = y_mean - x_mean.dot(beta);
    model.residual_variance = residual.squaredNorm() / static_cast<double>(n);
    return model;
}

double node_loglik(const GaussianNodeModel& model, const TransitionTable& data) {
    if (static_cast<Eigen::Index>(model.parents.size()) != model.coefficients.size())
        throw ValidationError("node model has " + std::to_string(model.parents.size()) + " parents but " +
                              std::to_string(model.coefficients.size()) + " coefficients");
    if (!(model.residual_variance >= min_residual_variance))
        throw DegenerateModelError("node " + node_name(model.target, data.conditions) +
                                   " has zero residual variance; its likelihood is unbounded");
    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(data.rows()), model.intercept);
    for (std::size_t j = 0; j < model.parents.size(); ++j)
        fitted += model.coefficients(static_cast<Eigen::Index>(j)) * column_of(data, model.parents[j]);
    const double rss = (column_of(data, model.target) - fitted).squaredNorm();
    const double n = static_cast<double>(data.rows());
    const double var = model.residual_variance;
    return -0.5 * n * std::log(2.0 * std::numbers::pi * var) - rss / (2.0 * var);
}

double score_node(NodeRef target, std::span<const NodeRef> parents, const TransitionTable& data,
                  const PenaltyConfig& penalty) {
    const auto model = fit_node(target, parents, data);
    const double n = static_cast<double>(data.rows());
    return node_loglik(model, data) -
           penalty.per_parameter(n) * static_cast<double>(parameter_count(parents.size()));
}

SufficientStats::SufficientStats(const TransitionTable& data) : m_conditions(data.n_conditions()) {
    Eigen::MatrixXd z(data.x0.rows(), 2 * data.x0.cols());
    z << data.x0, data.x1;
    build(z, nullptr);
}

SufficientStats::SufficientStats(const TransitionTable& data, std::span<const double> weights)
    : m_conditions(data.n_conditions()) {
    if (weights.size() != data.rows()) throw ValidationError("one weight per transition row is required");
    Eigen::VectorXd w(static_cast<Eigen::Index>(weights.size()));
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0)) throw ValidationError("row weights must be non-negative");
        w(static_cast<Eigen::Index>(i)) = weights[i];
        nonzero += weights[i] > 0.0 ? 1 : 0;
    }
    // Compact to the rows actually drawn.
    Eigen::MatrixXd z(static_cast<Eigen::Index>(nonzero), 2 * data.x0.cols());
    Eigen::VectorXd wz(static_cast<Eigen::Index>(nonzero));
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w(i) <= 0.0) continue;
        z.row(row) << data.x0.row(i), data.x1.row(i);
        wz(row) = w(i);
        ++row;
    }
    build(z, &wz);
}

void SufficientStats::build(const Eigen::MatrixXd& z, const Eigen::VectorXd* weights) {
    if (weights) {
        m_n = weights->sum();
        if (!(m_n > 0.0)) throw InsufficientDataError("no rows carry positive weight");
        m_mean = (z.transpose() * *weights) / m_n;
        Eigen::MatrixXd centered = z.rowwise() - m_mean.transpose();
        m_cross = centered.transpose() * weights->asDiagonal() * centered;
    } else {
        m_n = static_cast<double>(z.rows());
        if (z.rows() == 0) throw InsufficientDataError("transition table is empty");
        m_mean = z.colwise().mean().transpose();
        Eigen::MatrixXd centered = z.rowwise() - m_mean.transpose();
        m_cross.noalias() = centered.transpose() * centered;
    }
}

double SufficientStats::rss(std::size_t target, std::span<const std::size_t> parents) const {
    const auto t = static_cast<Eigen::Index>(target);
    const double syy = m_cross(t, t);
    const auto k = static_cast<Eigen::Index>(parents.size());
    if (k == 0) return syy;
    if (m_n < static_cast<double>(parents.size() + 2))
        throw InsufficientDataError("too few rows for " + std::to_string(parents.size()) + " parents");

    Eigen::MatrixXd sxx(k, k);
    Eigen::VectorXd sxy(k), scale(k);
    for (Eigen::Index a = 0; a < k; ++a) {
        auto pa = static_cast<Eigen::Index>(parents[static_cast<std::size_t>(a)]);
        const double d = m_cross(pa, pa);
        if (!(d > 0.0)) throw SingularityError("constant parent column " + std::to_string(pa));
        scale(a) = 1.0 / std::sqrt(d);
        sxy(a) = m_cross(pa, t) * scale(a);
        for (Eigen::Index b = 0; b < k; ++b)
            sxx(a, b) = m_cross(pa, static_cast<Eigen::Index>(parents[static_cast<std::size_t>(b)]));
    }
    // Correlation scaling keeps the rank test independent of units.
    sxx = scale.asDiagonal() * sxx * scale.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sxx);
    const auto& d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || d.minCoeff() < rank_tolerance * d.maxCoeff() || d.minCoeff() <= 0.0)
        throw SingularityError("collinear parent set");
    const double explained = sxy.dot(ldlt.solve(sxy));
    return std::max(syy - explained, 0.0);
}

double SufficientStats::local_score(std::size_t target, std::span<const std::size_t> parents,
                                    const PenaltyConfig& penalty) const {
    return mle_loglik(rss(target, parents), m_n) -
           penalty.per_parameter(m_n) * static_cast<double>(parameter_count(parents.size()));
}

}  // namespace panelbn
