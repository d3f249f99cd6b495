#include <panelbn/simulation.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Eigenvalues>

#include <panelbn/error.hpp>
#include <panelbn/parallel.hpp>
#include <panelbn/random.hpp>

namespace panelbn {

namespace {

double uniform_in(Rng& rng, Interval range) { return range.lo + (range.hi - range.lo) * uniform01(rng); }

void check_interval(Interval range, const char* name, bool positive) {
    if (!(range.lo <= range.hi) || !std::isfinite(range.lo) || !std::isfinite(range.hi) ||
        (positive ? !(range.lo > 0.0) : !(range.lo >= 0.0)))
        throw ValidationError(std::string(name) + " must be a finite interval with lo <= hi and lo " +
                              (positive ? "> 0" : ">= 0"));
}

std::string two_digits(std::size_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02zu", v);
    return buf;
}

Date first_week() { return Date{std::chrono::year{2020} / std::chrono::March / 2}; }

std::vector<RegionId> make_regions(std::size_t n_counties) {
    const std::size_t n_states =
        n_counties < 4 ? 1 : std::min<std::size_t>(50, std::max<std::size_t>(2, n_counties / 20));
    std::vector<RegionId> regions;
    regions.reserve(n_counties);
    for (std::size_t c = 0; c < n_counties; ++c) {
        const std::size_t state = c * n_states / n_counties + 1;
        char county[48];
        std::snprintf(county, sizeof county, "%02zu%03zu", state, c + 1);
        regions.push_back({two_digits(state), county});
    }
    std::sort(regions.begin(), regions.end());
    return regions;
}

std::vector<Date> make_weeks(std::size_t n_weeks) {
    std::vector<Date> weeks;
    weeks.reserve(n_weeks);
    for (std::size_t w = 0; w < n_weeks; ++w) weeks.push_back(first_week() + std::chrono::days{7 * w});
    return weeks;
}

Eigen::MatrixXd lyapunov(const Eigen::MatrixXd& b, const Eigen::VectorXd& noise_var) {
    Eigen::MatrixXd d = noise_var.asDiagonal();
    Eigen::MatrixXd sigma = d;
    for (int it = 0; it < 100000; ++it) {
        Eigen::MatrixXd next = b * sigma * b.transpose() + d;
        const double change = (next - sigma).cwiseAbs().maxCoeff();
        sigma = std::move(next);
        if (change <= 1e-13 * sigma.cwiseAbs().maxCoeff()) return sigma;
        if (!sigma.allFinite() || sigma.cwiseAbs().maxCoeff() > divergence_limit)
            throw InstabilityError("implied VAR(1) is not stationary");
    }
    throw InstabilityError("stationary covariance did not converge");
}

}  // namespace

std::vector<std::string> default_condition_names(std::size_t n) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("C" + two_digits(i + 1));
    return names;
}

double spectral_radius(const DynamicBN& dbn) {
    const Eigen::MatrixXd b = dbn.coefficient_matrix();
    if (b.size() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(b, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::VectorXd stationary_mean(const DynamicBN& dbn) {
    const auto p = static_cast<Eigen::Index>(dbn.n_conditions());
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p, p) - dbn.coefficient_matrix();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) throw InstabilityError("I - B is singular: the process has a unit root");
    return lu.solve(dbn.intercepts());
}

Eigen::MatrixXd stationary_covariance(const DynamicBN& dbn) {
    return lyapunov(dbn.coefficient_matrix(), dbn.residual_variances());
}

DynamicBN random_dbn(const GroundTruthSpec& spec) {
    const std::size_t n = spec.n_conditions;
    if (n == 0) throw ValidationError("ground truth needs at least one condition");
    check_interval(spec.coefficient_range, "coefficient_range", false);
    check_interval(spec.noise_sd_range, "noise_sd_range", true);
    check_interval(spec.level_sd_range, "level_sd_range", true);
    if (!(spec.arcs_per_condition >= 0.0)) throw ValidationError("arcs_per_condition must be >= 0");
    if (!(spec.county_intercept_sd >= 0.0)) throw ValidationError("county_intercept_sd must be >= 0");
    if (!(spec.feedback_probability >= 0.0 && spec.feedback_probability <= 1.0))
        throw ValidationError("feedback_probability must lie in [0, 1]");
    if (!(spec.max_spectral_radius > 0.0 && spec.max_spectral_radius < 1.0))
        throw ValidationError("max_spectral_radius must lie in (0, 1)");
    const auto target = static_cast<std::size_t>(std::llround(spec.arcs_per_condition * static_cast<double>(n)));
    if (target > n * (n - 1))
        throw ValidationError("infeasible density: " + std::to_string(target) + " cross arcs requested but only " +
                              std::to_string(n * (n - 1)) + " exist among " + std::to_string(n) + " conditions");

    Rng rng(derive_seed(spec.seed, 0));
    const auto p = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(p, p);  // b(to, from)
    for (Eigen::Index i = 0; i < p; ++i) b(i, i) = uniform_in(rng, spec.coefficient_range);

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    shuffle(pairs.begin(), pairs.end(), rng);

    TwoSliceGraph graph(default_condition_names(n));
    std::size_t placed = 0;
    auto coefficient = [&] {
        const double magnitude = uniform_in(rng, spec.coefficient_range);
        return (rng() & 1U) ? magnitude : -magnitude;
    };
    auto place = [&](std::size_t from, std::size_t to) {
        graph.add_arc(from, to);
        b(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from)) = coefficient();
        ++placed;
    };
    for (const auto& [i, j] : pairs) {
        if (placed >= target) break;
        if (target - placed >= 2 && uniform01(rng) < spec.feedback_probability) {
            place(i, j);
            place(j, i);
        } else if (rng() & 1U) {
            place(i, j);
        } else {
            place(j, i);
        }
    }
    // Dense requests can exhaust the pairs with one-way arcs; complete them.
    for (const auto& [i, j] : pairs) {
        if (placed >= target) break;
        if (!graph.has_arc(i, j)) place(i, j);
        if (placed < target && !graph.has_arc(j, i)) place(j, i);
    }
    for (std::size_t i = 0; i < n; ++i) graph.add_arc(i, i);

    {
        Eigen::EigenSolver<Eigen::MatrixXd> es(b, false);
        const double radius = es.eigenvalues().cwiseAbs().maxCoeff();
        if (radius > spec.max_spectral_radius) b *= spec.max_spectral_radius / radius;
    }

    Eigen::VectorXd noise_var(p);
    for (Eigen::Index i = 0; i < p; ++i) noise_var(i) = std::pow(uniform_in(rng, spec.noise_sd_range), 2);
    const Eigen::MatrixXd sigma = lyapunov(b, noise_var);
    Eigen::VectorXd mean(p);
    for (Eigen::Index i = 0; i < p; ++i)
        mean(i) = uniform_in(rng, spec.level_sd_range) *
                  std::sqrt(sigma(i, i) + spec.county_intercept_sd * spec.county_intercept_sd);
    const Eigen::VectorXd intercept = (Eigen::MatrixXd::Identity(p, p) - b) * mean;

    std::vector<GaussianNodeModel> nodes;
    for (std::size_t j = 0; j < n; ++j) {
        GaussianNodeModel node;
        node.target = at_t1(j);
        node.parents = graph.parents(j);
        node.coefficients.resize(static_cast<Eigen::Index>(node.parents.size()));
        for (std::size_t k = 0; k < node.parents.size(); ++k)
            node.coefficients(static_cast<Eigen::Index>(k)) =
                b(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(node.parents[k].condition));
        node.intercept = intercept(static_cast<Eigen::Index>(j));
        node.residual_variance = noise_var(static_cast<Eigen::Index>(j));
        nodes.push_back(std::move(node));
    }
    return DynamicBN(std::move(graph), std::move(nodes));
}

PanelDataset sample_panel(const DynamicBN& dbn, std::size_t n_counties, std::size_t n_weeks,
                          double county_intercept_sd, std::uint64_t seed, std::size_t threads) {
    if (n_weeks < 2) throw ValidationError("sample_panel needs at least two weeks");
    if (n_counties == 0) throw ValidationError("sample_panel needs at least one county");
    if (!(county_intercept_sd >= 0.0)) throw ValidationError("county_intercept_sd must be >= 0");
    const Eigen::VectorXd noise_var = dbn.residual_variances();
    if (noise_var.size() > 0 && !(noise_var.minCoeff() >= 0.0))
        throw ValidationError("sampling requires non-negative residual variances");

    const auto p = static_cast<Eigen::Index>(dbn.n_conditions());
    const Eigen::MatrixXd b = dbn.coefficient_matrix();
    const Eigen::VectorXd mean = stationary_mean(dbn);
    const Eigen::VectorXd noise_sd = noise_var.cwiseSqrt();

    PanelDataset panel(make_regions(n_counties), make_weeks(n_weeks), dbn.conditions());
    parallel_for(n_counties, threads, [&](std::size_t c) {
        auto rng = make_rng(seed, c);
        Eigen::VectorXd level(p);
        for (Eigen::Index i = 0; i < p; ++i) level(i) = mean(i) + county_intercept_sd * standard_normal(rng);
        Eigen::VectorXd x = level;
        Eigen::VectorXd next(p);
        for (std::size_t t = 0; t < burn_in_weeks + n_weeks; ++t) {
            if (t > 0) {
                next = level + b * (x - level);
                for (Eigen::Index i = 0; i < p; ++i) next(i) += noise_sd(i) * standard_normal(rng);
                x.swap(next);
                if (!x.allFinite() || x.cwiseAbs().maxCoeff() > divergence_limit)
                    throw InstabilityError("trajectory diverged beyond 1e12 in county " + std::to_string(c));
            }
            if (t >= burn_in_weeks)
                for (Eigen::Index i = 0; i < p; ++i)
                    panel.set_value(static_cast<std::size_t>(i), c, t - burn_in_weeks, x(i));
        }
    });
    return panel;
}

RecoveryReport score_recovery(const TwoSliceGraph& truth, const TwoSliceGraph& learned) {
    if (truth.conditions() != learned.conditions())
        throw ValidationError("truth and learned graphs must share the same conditions");
    const std::size_t p = truth.n_conditions();
    RecoveryReport out;
    std::size_t tp = 0, fb_total = 0, fb_hit = 0;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            const bool t = truth.has_arc(i, j), l = learned.has_arc(i, j);
            if (t != l) ++out.structural_hamming_distance;
            if (i == j) continue;
            out.true_cross_arcs += t ? 1 : 0;
            out.learned_cross_arcs += l ? 1 : 0;
            tp += (t && l) ? 1 : 0;
            if (i < j && t && truth.has_arc(j, i)) {
                ++fb_total;
                fb_hit += (learned.has_arc(i, j) && learned.has_arc(j, i)) ? 1 : 0;
            }
        }
    if (out.learned_cross_arcs > 0) out.arc_precision = static_cast<double>(tp) / static_cast<double>(out.learned_cross_arcs);
    if (out.true_cross_arcs > 0) out.arc_recall = static_cast<double>(tp) / static_cast<double>(out.true_cross_arcs);
    if (fb_total > 0) out.feedback_recall = static_cast<double>(fb_hit) / static_cast<double>(fb_total);
    return out;
}

PanelDataset ar1_panel(std::size_t n_regions, std::size_t n_weeks, std::size_t n_conditions, double rho,
                       double noise_fraction, std::uint64_t seed) {
    if (n_regions == 0 || n_weeks < 2 || n_conditions == 0) throw ValidationError("ar1_panel: empty shape");
    if (!(std::abs(rho) < 1.0)) throw ValidationError("ar1_panel: |rho| must be < 1");
    if (!(noise_fraction > 0.0)) throw ValidationError("ar1_panel: noise_fraction must be > 0");
    PanelDataset panel(make_regions(n_regions), make_weeks(n_weeks), default_condition_names(n_conditions));
    const double stationary = 1.0 / std::sqrt(1.0 - rho * rho);
    for (std::size_t c = 0; c < n_conditions; ++c)
        for (std::size_t r = 0; r < n_regions; ++r) {
            auto rng = make_rng(seed, c * n_regions + r);
            const double level = 5.0 + 10.0 * uniform01(rng);
            const double sd = noise_fraction * level;
            double x = level + sd * stationary * standard_normal(rng);
            for (std::size_t w = 0; w < n_weeks; ++w) {
                if (w > 0) x = level + rho * (x - level) + sd * standard_normal(rng);
                panel.set_value(c, r, w, std::max(x, 0.0));
            }
        }
    return panel;
}

}  // namespace panelbn
