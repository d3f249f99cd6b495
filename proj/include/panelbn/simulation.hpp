#ifndef PANELBN_SIMULATION_HPP
#define PANELBN_SIMULATION_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <panelbn/analysis.hpp>
#include <panelbn/data_model.hpp>
#include <panelbn/structure.hpp>

namespace panelbn {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct GroundTruthSpec {
    std::size_t n_conditions = 12;
    double arcs_per_condition = 3.0;      // cross arcs only; self arcs are always present
    Interval coefficient_range{0.2, 0.6};  // magnitudes; cross-arc signs are random
    Interval noise_sd_range{0.3, 0.3};
    double county_intercept_sd = 0.0;
    std::uint64_t seed = 0;
    double feedback_probability = 0.5;
    double max_spectral_radius = 0.95;
    /// Stationary means are drawn at this many (stationary + county) standard
    /// deviations above zero so sampled frequencies stay non-negative.
    Interval level_sd_range{10.0, 20.0};
};

/// "C01", "C02", ... for n conditions.
std::vector<std::string> default_condition_names(std::size_t n);

/// Seeded random two-slice ground truth. Every condition carries a self arc
/// with a positive coefficient. Cross arcs are placed on shuffled condition
/// pairs, each pair becoming a feedback loop with feedback_probability, until
/// round(arcs_per_condition * n) cross arcs exist. The coefficient matrix is
/// rescaled to spectral radius max_spectral_radius when it exceeds it.
DynamicBN random_dbn(const GroundTruthSpec& spec);

/// Spectral radius of the model's lag-1 coefficient matrix.
double spectral_radius(const DynamicBN& dbn);

/// Stationary mean (I - B)^-1 mu and covariance of the implied VAR(1).
Eigen::VectorXd stationary_mean(const DynamicBN& dbn);
Eigen::MatrixXd stationary_covariance(const DynamicBN& dbn);

inline constexpr std::size_t burn_in_weeks = 20;
inline constexpr double divergence_limit = 1e12;

/// Simulates n_counties independent trajectories. Each county gets a fixed
/// offset per condition ~ N(0, county_intercept_sd^2) and evolves as
///   x[t+1] = m_c + B (x[t] - m_c) + noise,  m_c = stationary mean + offset
/// after burn_in_weeks discarded weeks. Counties are grouped into states.
PanelDataset sample_panel(const DynamicBN& dbn, std::size_t n_counties, std::size_t n_weeks,
                          double county_intercept_sd, std::uint64_t seed, std::size_t threads = 1);

struct RecoveryReport {
    double arc_precision = 1.0;
    double arc_recall = 1.0;
    double feedback_recall = 1.0;
    std::size_t structural_hamming_distance = 0;
    std::size_t true_cross_arcs = 0;
    std::size_t learned_cross_arcs = 0;
};

/// Precision and recall over cross (non-self) arcs, recall of truth's
/// feedback pairs, and SHD over all arcs. Empty denominators score 1.
RecoveryReport score_recovery(const TwoSliceGraph& truth, const TwoSliceGraph& learned);

/// Independent AR(1) series per (region, condition) with per-series levels;
/// noise standard deviation is noise_fraction * level.
PanelDataset ar1_panel(std::size_t n_regions, std::size_t n_weeks, std::size_t n_conditions, double rho,
                       double noise_fraction, std::uint64_t seed);

}  // namespace panelbn

#endif  // PANELBN_SIMULATION_HPP
