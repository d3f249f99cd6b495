#ifndef PANELBN_AVERAGING_HPP
#define PANELBN_AVERAGING_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <panelbn/gaussbn.hpp>
#include <panelbn/structure.hpp>

namespace panelbn {

struct BootstrapSpec {
    std::size_t replicates = 500;
    double sample_fraction = 0.75;
    bool randomize_order = true;
    std::uint64_t master_seed = 0;
    /// Worker threads; 0 = hardware concurrency. Never affects results.
    std::size_t threads = 0;
};

inline constexpr double max_replicate_failure_rate = 0.10;

/// Directed arc inclusion frequencies over bootstrap replicates.
struct ArcStrengthTable {
    std::vector<std::string> conditions;
    Eigen::MatrixXd strengths;  // (from, to); diagonal = self arcs
    double threshold = 0.5;
    std::size_t replicates = 0;  // successful replicates (the denominator)
    std::size_t failures = 0;
    SearchMode mode = SearchMode::two_slice;

    double strength(std::size_t from, std::size_t to) const {
        return strengths(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to));
    }

    /// Strengths the threshold is estimated from: every legal two-slice arc,
    /// or every unordered pair (summing both directions) in static mode.
    std::vector<double> threshold_inputs() const;
};

struct BootstrapRun {
    ArcStrengthTable table;
    /// Learned arcs per replicate, indexed by replicate; empty and flagged in
    /// `failed` when the replicate's search threw.
    std::vector<std::vector<Arc>> replicate_arcs;
    std::vector<char> failed;
    std::vector<std::string> failure_messages;
};

/// Draws ceil(sample_fraction * n) rows with replacement per replicate from a
/// stream seeded by derive_seed(master_seed, replicate), optionally permutes
/// the variable order, runs the search, and counts arcs. Results are merged
/// by replicate index, so the thread count does not affect them.
BootstrapRun bootstrap_run(const TransitionTable& data, const PenaltyConfig& penalty, const SearchOptions& opts,
                           const BootstrapSpec& spec);

ArcStrengthTable bootstrap_strengths(const TransitionTable& data, const PenaltyConfig& penalty,
                                     const SearchOptions& opts, const BootstrapSpec& spec);

/// Row multiplicities of one bootstrap resample.
std::vector<double> bootstrap_weights(std::size_t n_rows, double sample_fraction, std::uint64_t seed);

struct ThresholdFit {
    double threshold = 0.5;
    double cost = 0.0;
    double interval_low = 0.0;   // exclusive
    double interval_high = 1.0;  // inclusive
};

/// L1-optimal binarisation of a strength distribution. Strengths below the
/// cut are idealised to 0, the rest to 1; the cost is the total distance to
/// the idealised values. The returned threshold is the midpoint of the
/// lowest optimal interval of cut points within (0, 1].
ThresholdFit fit_threshold(std::span<const double> strengths);
double estimate_threshold(std::span<const double> strengths);

/// Arcs with strength above the threshold, added in decreasing strength.
TwoSliceGraph consensus(const ArcStrengthTable& table);
TwoSliceGraph consensus(const ArcStrengthTable& table, double threshold);

/// Static-mode consensus: a pair enters when the summed strength of both
/// directions exceeds the threshold, oriented along the more frequent
/// direction; arcs closing a cycle are discarded.
StaticDag consensus_static(const ArcStrengthTable& table);
StaticDag consensus_static(const ArcStrengthTable& table, double threshold);

}  // namespace panelbn

#endif  // PANELBN_AVERAGING_HPP
