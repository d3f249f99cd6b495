#ifndef PANELBN_IMPUTATION_HPP
#define PANELBN_IMPUTATION_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <panelbn/data_model.hpp>

namespace panelbn {

inline constexpr std::size_t default_ewma_window = 4;

/// Two-sided exponentially weighted moving average. Each missing position is
/// filled with the 2^-d weighted mean of the originally observed values at
/// distance d <= k on both sides; the window doubles until at least one
/// observed neighbour falls inside it. Returns nullopt when fewer than two
/// values are observed, meaning the series should be dropped.
std::optional<std::vector<double>> impute_ewma(std::span<const double> series, std::size_t k = default_ewma_window);

struct DroppedSeries {
    std::size_t condition;
    std::size_t region;
};

struct PanelImputation {
    PanelDataset panel;  // dropped series stay missing
    std::vector<DroppedSeries> dropped;
    std::size_t n_imputed = 0;
};

/// Imputes every (region, condition) series within its coverage.
PanelImputation impute_panel(const PanelDataset& panel, std::size_t k = default_ewma_window, std::size_t threads = 1);

enum class MissingPattern { single, batch4 };

MissingPattern parse_missing_pattern(const std::string& name);
std::string to_string(MissingPattern p);

struct MissingnessSpec {
    MissingPattern pattern = MissingPattern::single;
    double fraction = 0.05;
    std::uint64_t seed = 0;
};

/// Boolean mask aligned with a panel's (condition, region, week) cells.
class CellMask {
public:
    CellMask() = default;
    CellMask(std::size_t conditions, std::size_t regions, std::size_t weeks)
        : m_regions(regions), m_weeks(weeks), m_bits(conditions * regions * weeks, 0) {}

    bool operator()(std::size_t c, std::size_t r, std::size_t w) const { return m_bits[index(c, r, w)] != 0; }
    void set(std::size_t c, std::size_t r, std::size_t w) { m_bits[index(c, r, w)] = 1; }
    std::size_t count() const;
    bool matches(const PanelDataset& panel) const {
        return m_bits.size() == panel.n_conditions() * panel.n_regions() * panel.n_weeks() &&
               m_regions == panel.n_regions() && m_weeks == panel.n_weeks();
    }

private:
    std::size_t index(std::size_t c, std::size_t r, std::size_t w) const { return (c * m_regions + r) * m_weeks + w; }

    std::size_t m_regions = 0;
    std::size_t m_weeks = 0;
    std::vector<unsigned char> m_bits;
};

struct MaskedPanel {
    PanelDataset panel;
    CellMask mask;
};

/// Masks round(fraction * length) cells of every series (single) or
/// round(fraction * length / 4) disjoint runs of four weeks (batch4).
/// Deterministic in spec.seed.
MaskedPanel inject_missing(const PanelDataset& panel, const MissingnessSpec& spec);

struct ImputationReport {
    double mean_relative_error = 0.0;
    std::map<std::string, double> per_condition_error;
    std::size_t n_imputed = 0;
    std::size_t n_dropped_series = 0;
    std::size_t n_zero_truth = 0;  // masked cells excluded because truth == 0
};

ImputationReport evaluate_imputation(const PanelDataset& truth, const PanelDataset& imputed, const CellMask& mask);

}  // namespace panelbn

#endif  // PANELBN_IMPUTATION_HPP
