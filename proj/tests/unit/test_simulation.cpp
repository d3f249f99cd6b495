#include <doctest.h>

#include <cmath>

#include <panelbn/error.hpp>
#include <panelbn/simulation.hpp>

using namespace panelbn;

TEST_CASE("one condition gives exactly the self loop") {
    GroundTruthSpec spec;
    spec.n_conditions = 1;
    spec.arcs_per_condition = 0;
    const auto dbn = random_dbn(spec);
    CHECK(dbn.graph().n_arcs() == 1);
    CHECK(dbn.graph().has_arc(0, 0));
}

TEST_CASE("cross-arc density over seeds") {
    GroundTruthSpec spec;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        spec.seed = seed;
        const auto dbn = random_dbn(spec);
        std::size_t cross = 0;
        for (const auto& a : dbn.graph().arcs()) cross += a.from != a.to;
        CHECK(cross >= 30);
        CHECK(cross <= 42);
        CHECK(spectral_radius(dbn) <= 0.95 + 1e-9);
        for (std::size_t c = 0; c < 12; ++c) {
            CHECK(dbn.graph().has_arc(c, c));
            CHECK(dbn.node(c).residual_variance == doctest::Approx(0.09));
        }
    }
}

TEST_CASE("same seed, same model") {
    GroundTruthSpec spec;
    spec.seed = 42;
    CHECK(random_dbn(spec) == random_dbn(spec));
    auto other = spec;
    other.seed = 43;
    CHECK_FALSE(random_dbn(spec) == random_dbn(other));
}

TEST_CASE("infeasible specs are rejected") {
    GroundTruthSpec spec;
    spec.n_conditions = 3;
    spec.arcs_per_condition = 3;  // only 6 cross arcs exist
    CHECK_THROWS_AS(random_dbn(spec), ValidationError);
    GroundTruthSpec bad_noise;
    bad_noise.noise_sd_range = {0.0, 0.3};
    CHECK_THROWS_AS(random_dbn(bad_noise), ValidationError);
    GroundTruthSpec empty;
    empty.n_conditions = 0;
    CHECK_THROWS_AS(random_dbn(empty), ValidationError);
}

TEST_CASE("sampled panels are complete and valid") {
    GroundTruthSpec spec;
    spec.seed = 5;
    const auto dbn = random_dbn(spec);
    const auto panel = sample_panel(dbn, 30, 40, 0.5, 6, 1);
    CHECK(panel.n_regions() == 30);
    CHECK(panel.n_weeks() == 40);
    CHECK(panel.complete());
    panel.validate();
    const auto again = sample_panel(dbn, 30, 40, 0.5, 6, 3);
    for (std::size_t c = 0; c < panel.n_conditions(); ++c)
        for (std::size_t r = 0; r < 30; ++r)
            for (std::size_t w = 0; w < 40; ++w) CHECK(panel.value(c, r, w) == again.value(c, r, w));
    CHECK_THROWS_AS(sample_panel(dbn, 3, 1, 0.0, 1, 1), ValidationError);
}

TEST_CASE("degenerate dynamics stay at the intercept plus county offset") {
    TwoSliceGraph g({"A", "B"});
    const DynamicBN dbn(g, {GaussianNodeModel{at_t1(0), {}, 5.0, Eigen::VectorXd(), 0.0},
                            GaussianNodeModel{at_t1(1), {}, 9.0, Eigen::VectorXd(), 0.0}});
    const auto panel = sample_panel(dbn, 4, 10, 0.0, 1, 1);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t w = 0; w < 10; ++w) {
            CHECK(panel.value(0, r, w) == 5.0);
            CHECK(panel.value(1, r, w) == 9.0);
        }
    const auto shifted = sample_panel(dbn, 4, 10, 1.0, 1, 1);
    for (std::size_t r = 0; r < 4; ++r) {
        const double offset = shifted.value(0, r, 0) - 5.0;
        for (std::size_t w = 0; w < 10; ++w) CHECK(shifted.value(0, r, w) == doctest::Approx(5.0 + offset));
    }
}

TEST_CASE("AR(1) lag correlation") {
    TwoSliceGraph g({"A"});
    g.add_arc(0, 0);
    const DynamicBN dbn(g, {GaussianNodeModel{at_t1(0), {at_t0(0)}, 20.0, Eigen::VectorXd::Constant(1, 0.8), 1.0}});
    const auto panel = sample_panel(dbn, 1, 10000, 0.0, 3, 1);
    auto s = panel.series(0, 0);
    double mean = 0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) num += (s[i] - mean) * (s[i + 1] - mean);
    for (double v : s) den += (v - mean) * (v - mean);
    CHECK(std::abs(num / den - 0.8) < 0.02);
}

TEST_CASE("explosive dynamics raise an instability error") {
    TwoSliceGraph g({"A"});
    g.add_arc(0, 0);
    const DynamicBN dbn(g, {GaussianNodeModel{at_t1(0), {at_t0(0)}, 1.0, Eigen::VectorXd::Constant(1, 3.0), 1.0}});
    CHECK_THROWS_AS(sample_panel(dbn, 1, 100, 0.0, 1, 1), InstabilityError);
}

TEST_CASE("running variance stabilises for accepted models") {
    GroundTruthSpec spec;
    spec.seed = 8;
    const auto dbn = random_dbn(spec);
    const auto panel = sample_panel(dbn, 200, 100, 0.0, 9, 1);
    for (std::size_t c = 0; c < panel.n_conditions(); ++c) {
        auto var_at = [&](std::size_t w) {
            double m = 0, v = 0;
            for (std::size_t r = 0; r < 200; ++r) m += panel.value(c, r, w);
            m /= 200.0;
            for (std::size_t r = 0; r < 200; ++r) v += std::pow(panel.value(c, r, w) - m, 2);
            return v / 199.0;
        };
        // Cross-sectional variance in the second half does not trend upward.
        double early = 0, late = 0;
        for (std::size_t w = 50; w < 75; ++w) early += var_at(w);
        for (std::size_t w = 75; w < 100; ++w) late += var_at(w);
        CHECK(late < 1.5 * early);
    }
}

TEST_CASE("recovery scoring") {
    TwoSliceGraph truth({"A", "B", "C"});
    truth.add_arc(0, 1);
    truth.add_arc(1, 0);
    truth.add_arc(2, 2);
    const auto same = score_recovery(truth, truth);
    CHECK(same.arc_precision == 1.0);
    CHECK(same.arc_recall == 1.0);
    CHECK(same.structural_hamming_distance == 0);

    const auto empty = score_recovery(truth, TwoSliceGraph(truth.conditions()));
    CHECK(empty.arc_recall == 0.0);
    CHECK(empty.structural_hamming_distance == 3);

    TwoSliceGraph half(truth.conditions());
    half.add_arc(0, 1);
    const auto h = score_recovery(truth, half);
    CHECK(h.feedback_recall == 0.0);
    CHECK(h.arc_recall == 0.5);
    CHECK(h.arc_precision == 1.0);

    CHECK_THROWS_AS(score_recovery(truth, TwoSliceGraph({"A", "B"})), ValidationError);
}

TEST_CASE("condition names") {
    const auto names = default_condition_names(12);
    CHECK(names.front() == "C01");
    CHECK(names.back() == "C12");
}
