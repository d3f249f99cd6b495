#include <panelbn/averaging.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include <panelbn/error.hpp>
#include <panelbn/parallel.hpp>
#include <panelbn/random.hpp>

namespace panelbn {

namespace {

// Strengths are counts / B; comparisons at this tolerance treat values that
// differ only by rounding as equal.
constexpr double cost_tolerance = 1e-12;

}  // namespace

std::vector<double> ArcStrengthTable::threshold_inputs() const {
    const auto p = static_cast<std::size_t>(strengths.rows());
    std::vector<double> out;
    if (mode == SearchMode::two_slice) {
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j) out.push_back(strength(i, j));
    } else {
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i + 1; j < p; ++j) out.push_back(std::min(1.0, strength(i, j) + strength(j, i)));
    }
    return out;
}

std::vector<double> bootstrap_weights(std::size_t n_rows, double sample_fraction, std::uint64_t seed) {
    if (n_rows == 0) throw InsufficientDataError("cannot resample an empty table");
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
        throw ValidationError("sample_fraction must lie in (0, 1]");
    const auto draws = static_cast<std::size_t>(std::ceil(sample_fraction * static_cast<double>(n_rows) - 1e-9));
    Rng rng(seed);
    std::vector<double> weights(n_rows, 0.0);
    for (std::size_t i = 0; i < draws; ++i) weights[static_cast<std::size_t>(uniform_index(rng, n_rows))] += 1.0;
    return weights;
}

BootstrapRun bootstrap_run(const TransitionTable& data, const PenaltyConfig& penalty, const SearchOptions& opts,
                           const BootstrapSpec& spec) {
    if (data.n_conditions() == 0) throw ValidationError("structure search needs at least one condition");
    if (data.rows() == 0) throw InsufficientDataError("transition table is empty");
    if (spec.replicates == 0) throw ValidationError("at least one bootstrap replicate is required");
    if (!(spec.sample_fraction > 0.0 && spec.sample_fraction <= 1.0))
        throw ValidationError("sample_fraction must lie in (0, 1]");

    const std::size_t p = data.n_conditions();
    const std::size_t b_total = spec.replicates;
    BootstrapRun run;
    run.replicate_arcs.assign(b_total, {});
    run.failed.assign(b_total, 0);
    run.failure_messages.assign(b_total, {});

    parallel_for(b_total, spec.threads, [&](std::size_t b) {
        const std::uint64_t seed = derive_seed(spec.master_seed, b);
        try {
            auto weights = bootstrap_weights(data.rows(), spec.sample_fraction, seed);
            SufficientStats stats(data, weights);
            SearchOptions local = opts;
            local.seed = splitmix64(seed);
            if (spec.randomize_order) {
                std::vector<std::size_t> order(p);
                std::iota(order.begin(), order.end(), std::size_t{0});
                Rng rng(splitmix64(seed ^ 0x5bd1e9955bd1e995ULL));
                shuffle(order.begin(), order.end(), rng);
                local.variable_order = std::move(order);
            }
            if (opts.mode == SearchMode::two_slice) {
                run.replicate_arcs[b] = hill_climb(stats, data.conditions, penalty, local).arcs();
            } else {
                run.replicate_arcs[b] = hill_climb_static(stats, data.conditions, penalty, local).arcs();
            }
        } catch (const ValidationError& e) {
            run.failed[b] = 1;
            run.failure_messages[b] = e.what();
        }
    });

    const auto failures = static_cast<std::size_t>(std::count(run.failed.begin(), run.failed.end(), 1));
    if (static_cast<double>(failures) > max_replicate_failure_rate * static_cast<double>(b_total)) {
        std::string first;
        for (std::size_t b = 0; b < b_total && first.empty(); ++b) first = run.failure_messages[b];
        throw BootstrapError(std::to_string(failures) + " of " + std::to_string(b_total) +
                             " bootstrap replicates failed (first: " + first + ")");
    }

    auto& table = run.table;
    table.conditions = data.conditions;
    table.mode = opts.mode;
    table.failures = failures;
    table.replicates = b_total - failures;
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t b = 0; b < b_total; ++b)
        for (const auto& a : run.replicate_arcs[b])
            counts(static_cast<Eigen::Index>(a.from), static_cast<Eigen::Index>(a.to)) += 1.0;
    table.strengths = counts / static_cast<double>(table.replicates);
    const auto inputs = table.threshold_inputs();
    table.threshold = inputs.empty() ? 0.5 : estimate_threshold(inputs);
    return run;
}

ArcStrengthTable bootstrap_strengths(const TransitionTable& data, const PenaltyConfig& penalty,
                                     const SearchOptions& opts, const BootstrapSpec& spec) {
    return bootstrap_run(data, penalty, opts, spec).table;
}

ThresholdFit fit_threshold(std::span<const double> strengths) {
    if (strengths.empty()) throw ValidationError("estimate_threshold needs at least one strength");
    std::vector<double> s(strengths.begin(), strengths.end());
    for (double v : s)
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("arc strengths must lie in [0, 1]");
    std::sort(s.begin(), s.end());

    // Cuts in (d_k, d_{k+1}] over distinct values d_1 < ... < d_m share one
    // cost: values <= d_k become 0, the rest 1.
    std::vector<double> distinct;
    for (double v : s)
        if (distinct.empty() || v > distinct.back()) distinct.push_back(v);

    const double total = std::accumulate(s.begin(), s.end(), 0.0);
    double below_sum = 0.0;  // sum of strengths < cut
    std::size_t below = 0;
    const auto n = s.size();

    ThresholdFit best;
    bool found = false;
    for (std::size_t k = 0; k <= distinct.size(); ++k) {
        if (k > 0) {
            while (below < n && s[below] <= distinct[k - 1]) below_sum += s[below++];
        }
        const double low = k == 0 ? 0.0 : distinct[k - 1];
        const double high = k < distinct.size() ? distinct[k] : 1.0;
        // Interval (low, high] must intersect (0, 1].
        if (!(high > low)) continue;
        const double above_sum = total - below_sum;
        const double above_count = static_cast<double>(n - below);
        const double cost = below_sum + (above_count - above_sum);
        if (!found || cost < best.cost - cost_tolerance) {
            best = {0.5 * (low + high), cost, low, high};
            found = true;
        }
    }
    return best;
}

double estimate_threshold(std::span<const double> strengths) { return fit_threshold(strengths).threshold; }

namespace {

std::vector<std::tuple<double, std::size_t, std::size_t>> ranked_arcs(const ArcStrengthTable& table,
                                                                      double threshold) {
    const auto p = static_cast<std::size_t>(table.strengths.rows());
    std::vector<std::tuple<double, std::size_t, std::size_t>> ranked;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            if (table.strength(i, j) > threshold) ranked.emplace_back(table.strength(i, j), i, j);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
    });
    return ranked;
}

void check_table(const ArcStrengthTable& table) {
    if (table.strengths.rows() != table.strengths.cols() ||
        static_cast<std::size_t>(table.strengths.rows()) != table.conditions.size())
        throw ValidationError("strength matrix must be square over the table's conditions");
}

}  // namespace

TwoSliceGraph consensus(const ArcStrengthTable& table, double threshold) {
    check_table(table);
    TwoSliceGraph graph(table.conditions);
    for (const auto& [s, from, to] : ranked_arcs(table, threshold)) graph.add_arc(from, to);
    return graph;
}

TwoSliceGraph consensus(const ArcStrengthTable& table) { return consensus(table, table.threshold); }

StaticDag consensus_static(const ArcStrengthTable& table, double threshold) {
    check_table(table);
    const auto p = table.conditions.size();
    std::vector<std::tuple<double, std::size_t, std::size_t>> ranked;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i + 1; j < p; ++j) {
            const double fwd = table.strength(i, j), bwd = table.strength(j, i);
            const double pair = std::min(1.0, fwd + bwd);
            if (pair <= threshold) continue;
            if (bwd > fwd) {
                ranked.emplace_back(pair, j, i);
            } else {
                ranked.emplace_back(pair, i, j);
            }
        }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
    });
    StaticDag dag(table.conditions);
    for (const auto& [s, from, to] : ranked)
        if (!dag.would_create_cycle(from, to)) dag.add_arc(from, to);
    return dag;
}

StaticDag consensus_static(const ArcStrengthTable& table) { return consensus_static(table, table.threshold); }

}  // namespace panelbn
