#include <doctest.h>

#include <panelbn/error.hpp>
#include <panelbn/imputation.hpp>
#include <panelbn/random.hpp>
#include <panelbn/simulation.hpp>

using namespace panelbn;

namespace {

constexpr double NA = missing_value;

PanelDataset single_series(const std::vector<double>& values) {
    std::vector<Date> weeks;
    for (std::size_t w = 0; w < values.size(); ++w)
        weeks.push_back(parse_iso_date("2020-03-02") + std::chrono::days(7 * static_cast<int>(w)));
    PanelDataset panel({{"01", "01001"}}, weeks, {"A"});
    for (std::size_t w = 0; w < values.size(); ++w) panel.set_value(0, 0, w, values[w]);
    return panel;
}

}  // namespace

TEST_CASE("symmetric neighbours get equal weight") {
    const std::vector<double> s{1, NA, 3};
    auto out = impute_ewma(s, 1);
    REQUIRE(out);
    CHECK((*out)[1] == 2.0);
    CHECK((*out)[0] == 1.0);
    CHECK((*out)[2] == 3.0);
}

TEST_CASE("asymmetric neighbours weighted by 2^-d") {
    const std::vector<double> s{1, NA, NA, 7};
    auto out = impute_ewma(s, 2);
    REQUIRE(out);
    CHECK((*out)[1] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK((*out)[2] == doctest::Approx((0.25 * 1 + 0.5 * 7) / 0.75).epsilon(1e-15));
}

TEST_CASE("fewer than two observations flags the series") {
    CHECK_FALSE(impute_ewma(std::vector<double>{NA, NA, NA}, 4));
    CHECK_FALSE(impute_ewma(std::vector<double>{NA, 5, NA}, 4));
}

TEST_CASE("window doubles until an observed neighbour is found") {
    std::vector<double> s(20, NA);
    s[0] = 2.0;
    s[19] = 4.0;
    auto out = impute_ewma(s, 1);
    REQUIRE(out);
    // Position 3: the window grows 1 -> 2 -> 4, which reaches only s[0].
    CHECK((*out)[3] == 2.0);
    // Middle positions eventually see both ends.
    CHECK((*out)[10] > 2.0);
    CHECK((*out)[10] < 4.0);
}

TEST_CASE("imputed values are convex combinations of observed neighbours") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> s(30);
        for (auto& v : s) v = uniform01(rng) < 0.3 ? NA : 10.0 * uniform01(rng);
        s[0] = 1.0;
        s[29] = 2.0;
        auto out = impute_ewma(s, 4);
        REQUIRE(out);
        double lo = 1e300, hi = -1e300;
        for (double v : s)
            if (!is_missing(v)) lo = std::min(lo, v), hi = std::max(hi, v);
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!is_missing(s[i])) CHECK((*out)[i] == s[i]);
            CHECK((*out)[i] >= lo - 1e-12);
            CHECK((*out)[i] <= hi + 1e-12);
        }
    }
}

TEST_CASE("locality: values outside the window do not matter") {
    std::vector<double> s{1, 2, 3, NA, 5, 6, 7, 8, 9, 10};
    auto a = impute_ewma(s, 2);
    s[9] = 1000.0;
    s[0] = -5.0;
    auto b = impute_ewma(s, 2);
    REQUIRE(a);
    REQUIRE(b);
    CHECK((*a)[3] == (*b)[3]);
}

TEST_CASE("single pass: imputed values never feed later ones") {
    const std::vector<double> s{0, NA, NA, NA, 8};
    auto out = impute_ewma(s, 1);
    REQUIRE(out);
    // Position 2 has no observed neighbour at distance 1; window doubles to 2.
    CHECK((*out)[2] == 4.0);
    CHECK((*out)[1] == 0.0);
    CHECK((*out)[3] == 8.0);
}

TEST_CASE("impute_panel records dropped series") {
    auto panel = single_series({1, NA, 3, NA});
    auto r = impute_panel(panel, 4, 1);
    CHECK(r.n_imputed == 2);
    CHECK(r.dropped.empty());
    CHECK(r.panel.complete());

    auto sparse = single_series({NA, 2, NA, NA});
    auto d = impute_panel(sparse, 4, 1);
    CHECK(d.dropped.size() == 1);
    CHECK(d.n_imputed == 0);
    CHECK_FALSE(d.panel.complete());
}

TEST_CASE("inject_missing counts and determinism") {
    const auto panel = ar1_panel(1, 100, 1, 0.5, 0.1, 3);
    const auto single = inject_missing(panel, {MissingPattern::single, 0.10, 7});
    CHECK(single.mask.count() == 10);
    const auto batch = inject_missing(panel, {MissingPattern::batch4, 0.20, 7});
    CHECK(batch.mask.count() == 20);
    // Runs are exactly four weeks long and disjoint.
    std::size_t runs = 0;
    for (std::size_t w = 0; w < 100;) {
        if (batch.mask(0, 0, w)) {
            std::size_t len = 0;
            while (w < 100 && batch.mask(0, 0, w)) ++len, ++w;
            CHECK(len % 4 == 0);
            runs += len / 4;
        } else {
            ++w;
        }
    }
    CHECK(runs == 5);
    const auto again = inject_missing(panel, {MissingPattern::batch4, 0.20, 7});
    for (std::size_t w = 0; w < 100; ++w) CHECK(again.mask(0, 0, w) == batch.mask(0, 0, w));
    for (std::size_t w = 0; w < 100; ++w) CHECK(is_missing(batch.panel.value(0, 0, w)) == batch.mask(0, 0, w));
}

TEST_CASE("inject_missing placement and size errors") {
    const auto panel = ar1_panel(1, 11, 1, 0.5, 0.1, 3);
    // round(0.99 * 11 / 4) = 3 runs need 12 weeks.
    CHECK_THROWS_AS(inject_missing(panel, {MissingPattern::batch4, 0.99, 1}), PlacementError);
    CHECK_THROWS_AS(inject_missing(panel, {MissingPattern::single, 0.01, 1}), ValidationError);
    CHECK_THROWS_AS(inject_missing(panel, {MissingPattern::single, 1.5, 1}), ValidationError);
    CHECK(parse_missing_pattern("batch4") == MissingPattern::batch4);
    CHECK_THROWS_AS(parse_missing_pattern("pairs"), ValidationError);
}

TEST_CASE("evaluate_imputation definitions") {
    auto truth = single_series({10, 20, 0, 40});
    auto imputed = single_series({10, 20, 5, 40});
    imputed.set_value(0, 0, 0, 11.0);
    CellMask mask(1, 1, 4);
    mask.set(0, 0, 0);
    mask.set(0, 0, 2);
    const auto r = evaluate_imputation(truth, imputed, mask);
    CHECK(r.mean_relative_error == doctest::Approx(0.10));
    CHECK(r.n_zero_truth == 1);
    CHECK(r.per_condition_error.at("A") == doctest::Approx(0.10));

    const auto exact = evaluate_imputation(truth, truth, mask);
    CHECK(exact.mean_relative_error == 0.0);

    CHECK_THROWS_AS(evaluate_imputation(truth, imputed, CellMask(1, 2, 4)), ValidationError);
}
