// Reference computations written without the library's numerics, used to
// check it. Plain vectors, Gaussian elimination, exhaustive enumeration.
#ifndef PANELBN_TESTS_ORACLE_HPP
#define PANELBN_TESTS_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <panelbn/data_model.hpp>
#include <panelbn/gaussbn.hpp>
#include <panelbn/structure.hpp>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::optional<std::vector<double>> solve(Matrix a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-300) return std::nullopt;
        std::swap(a[pivot], a[col]);
        std::swap(b[pivot], b[col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

struct Fit {
    double intercept = 0.0;
    std::vector<double> beta;
    double rss = 0.0;
    double sigma2 = 0.0;
};

// Ordinary least squares with intercept via the normal equations on the
// raw (uncentred) design [1 | X].
inline Fit least_squares(const Matrix& x_cols, const std::vector<double>& y) {
    const std::size_t n = y.size();
    const std::size_t k = x_cols.size() + 1;
    auto col = [&](std::size_t j, std::size_t i) { return j == 0 ? 1.0 : x_cols[j - 1][i]; };
    Matrix xtx(k, std::vector<double>(k, 0.0));
    std::vector<double> xty(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            long double s = 0.0L;
            for (std::size_t i = 0; i < n; ++i) s += static_cast<long double>(col(a, i)) * col(b, i);
            xtx[a][b] = static_cast<double>(s);
        }
        long double s = 0.0L;
        for (std::size_t i = 0; i < n; ++i) s += static_cast<long double>(col(a, i)) * y[i];
        xty[a] = static_cast<double>(s);
    }
    auto sol = solve(xtx, xty);
    if (!sol) throw std::runtime_error("oracle: singular normal equations");
    Fit f;
    f.intercept = (*sol)[0];
    f.beta.assign(sol->begin() + 1, sol->end());
    long double rss = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        long double pred = f.intercept;
        for (std::size_t j = 0; j + 1 < k; ++j) pred += static_cast<long double>(f.beta[j]) * x_cols[j][i];
        const long double r = y[i] - pred;
        rss += r * r;
    }
    f.rss = static_cast<double>(rss);
    f.sigma2 = f.rss / static_cast<double>(n);
    return f;
}

inline double gaussian_loglik(const std::vector<double>& residuals, double sigma2) {
    double s = 0.0;
    for (double r : residuals) s += r * r;
    const double n = static_cast<double>(residuals.size());
    return -0.5 * n * std::log(2.0 * std::numbers::pi * sigma2) - s / (2.0 * sigma2);
}

// Closed form for the MLE fit: -(n/2) (log(2 pi sigma2) + 1).
inline double mle_loglik(const Fit& f, std::size_t n) {
    const double dn = static_cast<double>(n);
    return -0.5 * dn * (std::log(2.0 * std::numbers::pi * f.sigma2) + 1.0);
}

inline std::vector<double> column(const Eigen::MatrixXd& m, std::size_t c) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    return v;
}

inline double local_score(const panelbn::TransitionTable& t, std::size_t target, const std::vector<std::size_t>& parents,
                          double w, bool paper_literal = false) {
    Matrix cols;
    for (auto p : parents) cols.push_back(column(t.x0, p));
    const auto fit = least_squares(cols, column(t.x1, target));
    const double n = static_cast<double>(t.rows());
    const double kappa = paper_literal ? std::log(n) : std::log(n) / 2.0;
    return mle_loglik(fit, t.rows()) - w * kappa * static_cast<double>(parents.size() + 2);
}

// Best penalised score over every legal two-slice graph (p <= 3).
inline double exhaustive_best(const panelbn::TransitionTable& t, double w) {
    const std::size_t p = t.n_conditions();
    double total = 0.0;
    // The score decomposes per target, so each target's parent set can be
    // enumerated independently; the full 2^(p*p) enumeration is the product.
    for (std::size_t target = 0; target < p; ++target) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
            std::vector<std::size_t> parents;
            for (std::size_t j = 0; j < p; ++j)
                if (mask & (1u << j)) parents.push_back(j);
            best = std::max(best, local_score(t, target, parents, w));
        }
        total += best;
    }
    return total;
}

// Full-graph enumeration without using decomposability.
inline double exhaustive_best_full(const panelbn::TransitionTable& t, double w) {
    const std::size_t p = t.n_conditions();
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint64_t mask = 0; mask < (1ull << (p * p)); ++mask) {
        double s = 0.0;
        for (std::size_t target = 0; target < p; ++target) {
            std::vector<std::size_t> parents;
            for (std::size_t j = 0; j < p; ++j)
                if (mask & (1ull << (j * p + target))) parents.push_back(j);
            s += local_score(t, target, parents, w);
        }
        best = std::max(best, s);
    }
    return best;
}

inline double threshold_cost(const std::vector<double>& s, double t) {
    double c = 0.0;
    for (double v : s) c += v < t ? v : 1.0 - v;
    return c;
}

// Grid scan of the binarisation cost over t in (0, 1]; returns the lowest
// optimal grid point.
inline std::pair<double, double> grid_threshold(const std::vector<double>& s, std::size_t grid = 10000) {
    double best_t = 1.0, best_c = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i <= grid; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(grid);
        const double c = threshold_cost(s, t);
        if (c < best_c - 1e-12) {
            best_c = c;
            best_t = t;
        }
    }
    return {best_t, best_c};
}

// Single-region table from explicit columns; x0/x1 are n x p.
inline panelbn::TransitionTable table_from(const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x1,
                                           std::vector<std::string> names = {}) {
    panelbn::TransitionTable t;
    const auto p = static_cast<std::size_t>(x0.cols());
    if (names.empty())
        for (std::size_t c = 0; c < p; ++c) names.push_back("V" + std::to_string(c));
    t.conditions = names;
    t.regions = {{"01", "01001"}};
    const auto n = static_cast<std::size_t>(x0.rows());
    const panelbn::Date start = panelbn::parse_iso_date("2020-03-02");
    for (std::size_t w = 0; w <= n; ++w) t.weeks.push_back(start + std::chrono::days(7 * static_cast<int>(w)));
    t.row_region.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) t.row_week.push_back(i + 1);
    t.x0 = x0;
    t.x1 = x1;
    return t;
}

// Rows drawn from x1 = B x0 + noise with x0 ~ N(0, I); B(to, from).
inline panelbn::TransitionTable linear_table(const Eigen::MatrixXd& b, const std::vector<double>& noise_sd,
                                             std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const auto p = b.rows();
    Eigen::MatrixXd x0(static_cast<Eigen::Index>(n), p), x1(static_cast<Eigen::Index>(n), p);
    for (Eigen::Index i = 0; i < x0.rows(); ++i) {
        for (Eigen::Index c = 0; c < p; ++c) x0(i, c) = z(rng);
        for (Eigen::Index c = 0; c < p; ++c)
            x1(i, c) = b.row(c).dot(x0.row(i)) + noise_sd[static_cast<std::size_t>(c)] * z(rng);
    }
    return table_from(x0, x1);
}

}  // namespace oracle

#endif  // PANELBN_TESTS_ORACLE_HPP
