#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include <panelbn/error.hpp>
#include <panelbn/gaussbn.hpp>
#include <panelbn/random.hpp>

#include "../oracle.hpp"

using namespace panelbn;

namespace {

TransitionTable one_column(const std::vector<double>& x0, const std::vector<double>& x1) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(x0.size()), 1), b(static_cast<Eigen::Index>(x1.size()), 1);
    for (std::size_t i = 0; i < x0.size(); ++i) {
        a(static_cast<Eigen::Index>(i), 0) = x0[i];
        b(static_cast<Eigen::Index>(i), 0) = x1[i];
    }
    return oracle::table_from(a, b);
}

TransitionTable random_table(std::size_t n, std::size_t p, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x0(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p)),
        x1(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < x0.rows(); ++i)
        for (Eigen::Index c = 0; c < x0.cols(); ++c) {
            x0(i, c) = standard_normal(rng);
            x1(i, c) = 0.5 * x0(i, c) + standard_normal(rng);
        }
    return oracle::table_from(x0, x1);
}

}  // namespace

TEST_CASE("single-parent fit by hand") {
    const auto t = one_column({0, 1, 2}, {1, 3, 4});
    const std::vector<NodeRef> parents{at_t0(0)};
    const auto m = fit_node(at_t1(0), parents, t);
    CHECK(m.coefficients(0) == doctest::Approx(1.5));
    CHECK(m.intercept == doctest::Approx(7.0 / 6.0));
    // Residuals -1/6, 1/3, -1/6.
    CHECK(m.residual_variance == doctest::Approx((1.0 / 36 + 1.0 / 9 + 1.0 / 36) / 3.0));
}

TEST_CASE("intercept-only fit, likelihood and score") {
    const auto t = one_column({0, 0, 0}, {1, 2, 3});
    const auto m = fit_node(at_t1(0), {}, t);
    CHECK(m.intercept == doctest::Approx(2.0));
    CHECK(m.residual_variance == doctest::Approx(2.0 / 3.0));
    const double ll = node_loglik(m, t);
    CHECK(ll == doctest::Approx(-1.5 * std::log(2 * std::numbers::pi * 2.0 / 3.0) - 1.5));
    CHECK(ll == doctest::Approx(-3.6486).epsilon(1e-4));
    const double s = score_node(at_t1(0), {}, t, {1.0, PenaltyConvention::bic_half});
    CHECK(s == doctest::Approx(-4.7472).epsilon(1e-4));
    CHECK(score_node(at_t1(0), {}, t, {0.0, PenaltyConvention::bic_half}) == doctest::Approx(ll));
    const double literal = score_node(at_t1(0), {}, t, {1.0, PenaltyConvention::paper_literal});
    CHECK(literal == doctest::Approx(ll - 2.0 * std::log(3.0)));
}

TEST_CASE("duplicated parent is singular") {
    const auto t = random_table(50, 2, 1);
    const std::vector<NodeRef> parents{at_t0(0), at_t0(0)};
    CHECK_THROWS_AS(fit_node(at_t1(1), parents, t), SingularityError);

    Eigen::MatrixXd x0 = t.x0;
    x0.col(1) = 3.0 * x0.col(0) + Eigen::VectorXd::Constant(x0.rows(), 2.0);
    const auto collinear = oracle::table_from(x0, t.x1);
    const std::vector<NodeRef> both{at_t0(0), at_t0(1)};
    CHECK_THROWS_WITH_AS(fit_node(at_t1(0), both, collinear), doctest::Contains("V1"), SingularityError);
}

TEST_CASE("too few rows") {
    const auto t = random_table(3, 3, 2);
    const std::vector<NodeRef> parents{at_t0(0), at_t0(1)};
    CHECK_THROWS_AS(fit_node(at_t1(0), parents, t), InsufficientDataError);
}

TEST_CASE("perfect fit is degenerate") {
    const auto t = one_column({0, 1, 2, 3}, {1, 3, 5, 7});
    const std::vector<NodeRef> parents{at_t0(0)};
    CHECK_THROWS_AS(score_node(at_t1(0), parents, t, {1.0, PenaltyConvention::bic_half}), DegenerateModelError);
    GaussianNodeModel m;
    m.target = at_t1(0);
    m.residual_variance = 0.0;
    CHECK_THROWS_AS(node_loglik(m, t), DegenerateModelError);
}

TEST_CASE("MLE beats perturbed parameters") {
    const auto t = random_table(200, 3, 3);
    const std::vector<NodeRef> parents{at_t0(0), at_t0(2)};
    const auto m = fit_node(at_t1(1), parents, t);
    const double best = node_loglik(m, t);
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        auto q = m;
        q.intercept += 0.05 * standard_normal(rng);
        q.coefficients(0) += 0.05 * standard_normal(rng);
        q.residual_variance *= std::exp(0.1 * standard_normal(rng));
        CHECK(node_loglik(q, t) < best);
    }
}

TEST_CASE("wider residuals lower the likelihood at fixed variance") {
    const auto t = one_column({0, 0, 0, 0}, {1, 2, 4, 5});
    auto m = fit_node(at_t1(0), {}, t);
    const auto spread = one_column({0, 0, 0, 0}, {-1, 1, 5, 7});
    CHECK(node_loglik(m, spread) < node_loglik(m, t));
}

TEST_CASE("fit matches the normal-equations oracle") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const std::size_t p = 1 + seed % 12;
        const auto t = random_table(60 + 10 * p, p, 100 + seed);
        std::vector<NodeRef> parents;
        oracle::Matrix cols;
        for (std::size_t j = 0; j < p; ++j) {
            parents.push_back(at_t0(j));
            cols.push_back(oracle::column(t.x0, j));
        }
        const std::size_t target = seed % p;
        const auto m = fit_node(at_t1(target), parents, t);
        const auto ref = oracle::least_squares(cols, oracle::column(t.x1, target));
        CHECK(m.intercept == doctest::Approx(ref.intercept).epsilon(1e-8));
        for (std::size_t j = 0; j < p; ++j)
            CHECK(m.coefficients(static_cast<Eigen::Index>(j)) == doctest::Approx(ref.beta[j]).epsilon(1e-8));
        CHECK(m.residual_variance == doctest::Approx(ref.sigma2).epsilon(1e-8));
        CHECK(node_loglik(m, t) == doctest::Approx(oracle::mle_loglik(ref, t.rows())).epsilon(1e-8));
    }
}

TEST_CASE("sufficient statistics agree with direct fitting") {
    const auto t = random_table(300, 5, 9);
    const SufficientStats stats(t);
    const PenaltyConfig pen{2.0, PenaltyConvention::bic_half};
    for (std::size_t target = 0; target < 5; ++target) {
        std::vector<NodeRef> parents{at_t0(target), at_t0((target + 2) % 5)};
        std::vector<std::size_t> cols{stats.column(parents[0]), stats.column(parents[1])};
        const double direct = score_node(at_t1(target), parents, t, pen);
        CHECK(stats.local_score(stats.column(at_t1(target)), cols, pen) == doctest::Approx(direct).epsilon(1e-10));
    }
}

TEST_CASE("weighted statistics equal replicated rows") {
    const auto t = random_table(40, 3, 11);
    std::vector<double> weights(40, 0.0);
    std::vector<std::size_t> rows;
    Rng rng(12);
    for (int i = 0; i < 40; ++i) {
        auto r = uniform_index(rng, 40);
        weights[r] += 1.0;
        rows.push_back(r);
    }
    std::sort(rows.begin(), rows.end());
    const SufficientStats weighted(t, weights);
    const SufficientStats expanded(t.subset(rows));
    const PenaltyConfig pen{1.0, PenaltyConvention::bic_half};
    const std::vector<std::size_t> parents{weighted.column(at_t0(0)), weighted.column(at_t0(2))};
    CHECK(weighted.local_score(weighted.column(at_t1(1)), parents, pen) ==
          doctest::Approx(expanded.local_score(expanded.column(at_t1(1)), parents, pen)).epsilon(1e-10));
}

TEST_CASE("logL is monotone in parent inclusion; the penalised score is not") {
    const auto t = random_table(500, 4, 21);
    const PenaltyConfig zero{0.0, PenaltyConvention::bic_half};
    const PenaltyConfig heavy{8.0, PenaltyConvention::bic_half};
    std::vector<NodeRef> parents;
    double prev = score_node(at_t1(0), parents, t, zero);
    bool penalised_dropped = false;
    double prev_pen = score_node(at_t1(0), parents, t, heavy);
    for (std::size_t j = 1; j < 4; ++j) {
        parents.push_back(at_t0(j));
        const double s = score_node(at_t1(0), parents, t, zero);
        CHECK(s >= prev - 1e-9);
        prev = s;
        const double sp = score_node(at_t1(0), parents, t, heavy);
        if (sp < prev_pen) penalised_dropped = true;
        prev_pen = sp;
    }
    CHECK(penalised_dropped);
}

TEST_CASE("row permutation leaves scores unchanged") {
    const auto t = random_table(100, 3, 5);
    std::vector<std::size_t> perm(100);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(6);
    panelbn::shuffle(perm.begin(), perm.end(), rng);
    const auto shuffled = t.subset(perm);
    const std::vector<NodeRef> parents{at_t0(0), at_t0(1)};
    const PenaltyConfig pen{1.0, PenaltyConvention::bic_half};
    CHECK(score_node(at_t1(2), parents, shuffled, pen) ==
          doctest::Approx(score_node(at_t1(2), parents, t, pen)).epsilon(1e-12));
}

TEST_CASE("pure-noise parent lowers the score at w=4") {
    int failures = 0;
    const PenaltyConfig pen{4.0, PenaltyConvention::bic_half};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(derive_seed(77, seed));
        Eigen::MatrixXd x0(10000, 2), x1(10000, 2);
        for (Eigen::Index i = 0; i < 10000; ++i) {
            x0(i, 0) = standard_normal(rng);
            x0(i, 1) = standard_normal(rng);
            x1(i, 0) = standard_normal(rng);
            x1(i, 1) = standard_normal(rng);
        }
        const auto t = oracle::table_from(x0, x1);
        const std::vector<NodeRef> noise{at_t0(1)};
        if (score_node(at_t1(0), noise, t, pen) >= score_node(at_t1(0), {}, t, pen)) ++failures;
    }
    CHECK(failures < 3);
}

TEST_CASE("penalty convention names") {
    CHECK(parse_penalty_convention("bic_half") == PenaltyConvention::bic_half);
    CHECK(parse_penalty_convention("paper_literal") == PenaltyConvention::paper_literal);
    CHECK(to_string(PenaltyConvention::paper_literal) == "paper_literal");
    CHECK_THROWS_AS(parse_penalty_convention("aic"), ValidationError);
    PenaltyConfig pc{2.0, PenaltyConvention::bic_half};
    CHECK(pc.per_parameter(100.0) == doctest::Approx(std::log(100.0)));
}
