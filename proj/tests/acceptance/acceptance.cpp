// Acceptance checks 1-8. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. Criteria 9-11 need the public search-trends
// dataset and are reported as skipped.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <panelbn/analysis.hpp>
#include <panelbn/averaging.hpp>
#include <panelbn/imputation.hpp>
#include <panelbn/random.hpp>
#include <panelbn/simulation.hpp>

#include "../oracle.hpp"

using namespace panelbn;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

const PenaltyConfig bic{1.0, PenaltyConvention::bic_half};

Outcome score_oracle() {
    Outcome o;
    std::size_t bad = 0;
    for (std::uint64_t inst = 0; inst < 200; ++inst) {
        Rng rng(derive_seed(1, inst));
        const std::size_t p = 1 + uniform_index(rng, 12);
        const std::size_t n = 30 + uniform_index(rng, 400);
        Eigen::MatrixXd x0(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p)),
            x1(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
        for (Eigen::Index i = 0; i < x0.rows(); ++i)
            for (Eigen::Index c = 0; c < x0.cols(); ++c) {
                x0(i, c) = 5.0 + 2.0 * standard_normal(rng);
                x1(i, c) = 0.3 * x0(i, c) + (c > 0 ? 0.2 * x0(i, c - 1) : 0.0) + standard_normal(rng);
            }
        const auto t = oracle::table_from(x0, x1);
        const std::size_t target = uniform_index(rng, p);
        std::vector<NodeRef> parents;
        oracle::Matrix cols;
        for (std::size_t j = 0; j < p; ++j)
            if (uniform01(rng) < 0.7 || j == target) {
                parents.push_back(at_t0(j));
                cols.push_back(oracle::column(x0, j));
            }
        const auto m = fit_node(at_t1(target), parents, t);
        const auto ref = oracle::least_squares(cols, oracle::column(x1, target));
        bool ok = rel_close(m.intercept, ref.intercept, 1e-8) && rel_close(m.residual_variance, ref.sigma2, 1e-8) &&
                  rel_close(node_loglik(m, t), oracle::mle_loglik(ref, n), 1e-8);
        for (std::size_t j = 0; j < parents.size(); ++j)
            ok = ok && rel_close(m.coefficients(static_cast<Eigen::Index>(j)), ref.beta[j], 1e-8);
        bad += !ok;
    }
    o.pass = bad == 0;
    o.detail = fmt("%.0f/200 instances match", 200.0 - static_cast<double>(bad));
    return o;
}

Outcome exhaustive_search() {
    std::size_t matches = 0;
    for (std::uint64_t inst = 0; inst < 100; ++inst) {
        Rng rng(derive_seed(2, inst));
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(inst % 2);
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = 0; j < p; ++j)
                if (uniform01(rng) < 0.4) b(i, j) = (uniform01(rng) < 0.5 ? -1 : 1) * (0.02 + 0.5 * uniform01(rng));
        std::vector<double> sd(static_cast<std::size_t>(p));
        for (auto& s : sd) s = 0.5 + uniform01(rng);
        const auto t = oracle::linear_table(b, sd, 20000, derive_seed(20, inst));
        SearchOptions opts;
        opts.restarts = 5;
        opts.seed = inst;
        const double found = network_score(t, hill_climb(t, bic, opts), bic);
        const double best = oracle::exhaustive_best_full(t, 1.0);
        matches += rel_close(found, best, 1e-9);
    }
    return {matches >= 95, fmt("%.0f/100 instances reach the brute-force optimum", static_cast<double>(matches))};
}

Outcome threshold_oracle() {
    Outcome o;
    const auto worked = fit_threshold(std::vector<double>{0.1, 0.15, 0.9, 1.0});
    o.pass = std::abs(worked.interval_low - 0.15) < 1e-12 && std::abs(worked.interval_high - 0.9) < 1e-12;
    std::size_t agree = 0;
    for (std::uint64_t inst = 0; inst < 500; ++inst) {
        Rng rng(derive_seed(3, inst));
        std::vector<double> s(1 + uniform_index(rng, 60));
        for (auto& v : s) v = static_cast<double>(uniform_index(rng, 1001)) / 1000.0;
        const auto fit = fit_threshold(s);
        const auto [gt, gc] = oracle::grid_threshold(s);
        (void)gt;
        agree += std::abs(fit.cost - gc) < 1e-9 && std::abs(oracle::threshold_cost(s, fit.threshold) - gc) < 1e-9;
    }
    o.pass = o.pass && agree == 500;
    o.detail = fmt("worked example (%.2f, %.2f], %.0f/500 agree with grid", worked.interval_low, worked.interval_high,
                   static_cast<double>(agree));
    return o;
}

Outcome end_to_end() {
    double precision = 0, recall = 0, feedback = 0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        GroundTruthSpec spec;
        spec.seed = static_cast<std::uint64_t>(s);
        const auto truth = random_dbn(spec);
        const auto panel = sample_panel(truth, 200, 100, spec.county_intercept_sd, derive_seed(spec.seed, 1));
        const auto table = make_transition_table(panel);
        BootstrapSpec boot;
        boot.replicates = 100;
        boot.master_seed = derive_seed(spec.seed, 2);
        const auto strengths = bootstrap_strengths(table, PenaltyConfig{4.0, PenaltyConvention::bic_half}, {}, boot);
        const auto rep = score_recovery(truth.graph(), consensus(strengths));
        precision += rep.arc_precision;
        recall += rep.arc_recall;
        feedback += rep.feedback_recall;
    }
    precision /= seeds;
    recall /= seeds;
    feedback /= seeds;
    return {precision >= 0.9 && recall >= 0.8 && feedback >= 0.7,
            fmt("precision %.3f, recall %.3f, feedback recall %.3f", precision, recall, feedback)};
}

Outcome invariants() {
    std::vector<std::string> failed;
    // fold/unfold
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        Rng rng(derive_seed(5, seed));
        const std::size_t p = 1 + uniform_index(rng, 8);
        TwoSliceGraph g(default_condition_names(p));
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b)
                if (uniform01(rng) < 0.35) g.add_arc(a, b);
        if (!(unfold(fold(g)) == g) || !(fold(unfold(fold(g))) == fold(g))) {
            failed.push_back("fold");
            break;
        }
    }
    // decomposability
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4, 4);
    b(0, 0) = 0.5;
    b(1, 0) = 0.3;
    b(3, 2) = -0.4;
    const auto t = oracle::linear_table(b, {1, 1, 1, 1}, 2000, 55);
    Rng rng(56);
    for (int trial = 0; trial < 100; ++trial) {
        TwoSliceGraph g(t.conditions);
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t c = 0; c < 4; ++c)
                if (uniform01(rng) < 0.3) g.add_arc(a, c);
        double sum = 0;
        for (std::size_t c = 0; c < 4; ++c) {
            std::vector<std::size_t> ps;
            for (const auto& p : g.parents(c)) ps.push_back(p.condition);
            sum += oracle::local_score(t, c, ps, 1.0);
        }
        if (!rel_close(network_score(t, g, bic), sum, 1e-9)) {
            failed.push_back("decomposability");
            break;
        }
    }
    // consensus monotonicity and thread determinism
    BootstrapSpec spec;
    spec.replicates = 60;
    spec.master_seed = 9;
    spec.threads = 1;
    const auto one = bootstrap_strengths(t, bic, {}, spec);
    spec.threads = 4;
    const auto four = bootstrap_strengths(t, bic, {}, spec);
    if (!(one.strengths == four.strengths) || one.threshold != four.threshold) failed.push_back("thread determinism");
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (int k = 0; k <= 100; ++k) {
        const auto g = consensus(one, k / 100.0);
        if (g.n_arcs() > prev) {
            failed.push_back("consensus monotonicity");
            break;
        }
        prev = g.n_arcs();
    }
    std::string detail = failed.empty() ? "fold/unfold, decomposability, monotonicity, thread determinism" : "failed:";
    for (const auto& f : failed) detail += " " + f;
    return {failed.empty(), detail};
}

Outcome imputation() {
    const double na = missing_value;
    bool exact = true;
    const auto sym = impute_ewma(std::vector<double>{1, na, 3}, 1);
    exact = exact && sym && (*sym)[1] == 2.0;
    const auto asym = impute_ewma(std::vector<double>{1, na, na, 7}, 2);
    exact = exact && asym && std::abs((*asym)[1] - 3.0) < 1e-14 && std::abs((*asym)[2] - 3.75 / 0.75) < 1e-14;

    // Error at 2% missingness must not exceed error at 20%, averaged over
    // 20 seeds on the same synthetic panels, for both masking patterns.
    bool monotone = true;
    std::string detail = exact ? "examples exact" : "examples differ";
    for (auto pattern : {MissingPattern::single, MissingPattern::batch4}) {
        double low = 0.0, high = 0.0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto panel = ar1_panel(20, 104, 4, 0.8, 0.1, derive_seed(6, seed));
            for (double fraction : {0.02, 0.20}) {
                const auto masked = inject_missing(panel, {pattern, fraction, derive_seed(7, seed)});
                const auto imputed = impute_panel(masked.panel);
                (fraction < 0.1 ? low : high) +=
                    evaluate_imputation(panel, imputed.panel, masked.mask).mean_relative_error / 20.0;
            }
        }
        monotone = monotone && low <= high;
        detail += ", " + to_string(pattern) + fmt(" %.4f (2%%) vs %.4f (20%%)", low, high);
    }
    return {exact && monotone, detail};
}

Outcome variance_shares() {
    Rng rng(8);
    const Eigen::Index n = 100000;
    Eigen::MatrixXd x0(n, 3), x1(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < 3; ++c) x0(i, c) = standard_normal(rng);
        x1(i, 0) = standard_normal(rng);
        x1(i, 1) = standard_normal(rng);
        x1(i, 2) = 2.0 * x0(i, 0) + 1.0 * x0(i, 1) + standard_normal(rng);
    }
    const auto t = oracle::table_from(x0, x1, {"A", "B", "Y"});
    TwoSliceGraph g(t.conditions);
    g.add_arc(0, 2);
    g.add_arc(1, 2);
    const auto dec = variance_decomposition(fit_parameters(g, t), t, 2);
    double a = 0, b = 0;
    for (const auto& e : dec.entries) (e.parent == 0 ? a : b) = e.normalized_share;
    return {std::abs(a - 0.8) <= 0.02 && std::abs(b - 0.2) <= 0.02, fmt("shares %.4f / %.4f", a, b)};
}

Outcome static_vs_dynamic() {
    GroundTruthSpec spec;
    spec.seed = 31;
    spec.feedback_probability = 0.75;
    const auto truth = random_dbn(spec);
    const auto folded = fold(truth.graph());
    std::size_t pairs = 0, fb = 0;
    for (const auto& e : folded.edges())
        if (e.kind != EdgeKind::self_loop) {
            ++pairs;
            fb += e.kind == EdgeKind::feedback;
        }
    const auto panel = sample_panel(truth, 200, 100, 0.0, derive_seed(spec.seed, 1));
    const auto table = make_transition_table(panel);
    BootstrapSpec boot;
    boot.replicates = 100;
    boot.master_seed = 32;
    SearchOptions opts;
    opts.mode = SearchMode::static_dag;
    const auto strengths = bootstrap_strengths(table, PenaltyConfig{4.0, PenaltyConvention::bic_half}, opts, boot);
    const auto cmp = compare_static(consensus_static(strengths), folded);
    const double correct = cmp.proportion(cmp.correct);
    const double feedback_share = pairs == 0 ? 0.0 : static_cast<double>(fb) / static_cast<double>(pairs);
    return {feedback_share >= 0.5 && cmp.total() > 0 && correct < 0.4,
            fmt("feedback pairs %.0f%%, static arcs correct %.1f%% of %.0f", 100 * feedback_share, 100 * correct,
                static_cast<double>(cmp.total()))};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> body;
    };
    const std::vector<Criterion> criteria{
        {1, "score-oracle equivalence", 10, score_oracle},
        {2, "exhaustive-search equivalence", 120, exhaustive_search},
        {3, "threshold oracle", 5, threshold_oracle},
        {4, "end-to-end recovery", 1800, end_to_end},
        {5, "structural invariants", 0, invariants},
        {6, "imputation", 0, imputation},
        {7, "variance decomposition", 0, variance_shares},
        {8, "static vs dynamic", 0, static_vs_dynamic},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = Clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        if (c.budget_s > 0 && secs > c.budget_s) {
            o.pass = false;
            o.detail += fmt(" (over the %.0f s budget)", c.budget_s);
        }
        failures += !o.pass;
        std::printf("criterion %d %-32s %s  %s  [%.2f s]\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    secs);
        std::fflush(stdout);
    }
    for (int id : {9, 10, 11})
        std::printf("criterion %d %-32s SKIPPED  requires the public search-trends dataset\n", id, "dataset-based");
    return failures == 0 ? 0 : 1;
}
