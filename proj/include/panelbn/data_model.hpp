#ifndef PANELBN_DATA_MODEL_HPP
#define PANELBN_DATA_MODEL_HPP

#include <chrono>
#include <compare>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace panelbn {

using Date = std::chrono::sys_days;

Date parse_iso_date(const std::string& text);
std::string format_iso_date(Date d);

inline constexpr double missing_value = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return v != v; }

struct RegionId {
    std::string state;
    std::string county;

    auto operator<=>(const RegionId&) const = default;
    bool operator==(const RegionId&) const = default;

    std::string to_string() const { return state + "/" + county; }
};

/// Half-open range of week indices [first, last) for which a region has rows.
struct WeekSpan {
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t size() const { return last > first ? last - first : 0; }
    bool contains(std::size_t w) const { return w >= first && w < last; }
};

/// Maps each analysis condition to the raw symptom columns it aggregates.
class ConditionMapping {
public:
    using Entry = std::pair<std::string, std::vector<std::string>>;

    ConditionMapping() = default;
    explicit ConditionMapping(std::vector<Entry> entries);

    static ConditionMapping from_json(const std::string& text);
    static ConditionMapping identity(const std::vector<std::string>& columns);

    const std::vector<Entry>& entries() const { return m_entries; }
    std::vector<std::string> conditions() const;
    std::size_t size() const { return m_entries.size(); }
    bool empty() const { return m_entries.empty(); }

private:
    std::vector<Entry> m_entries;
};

enum class Aggregation { sum, mean };

/// Weekly condition frequencies for every region. Values are stored
/// condition-major, then region, then week; cells outside a region's
/// coverage are not part of the panel and read as missing.
class PanelDataset {
public:
    PanelDataset() = default;
    PanelDataset(std::vector<RegionId> regions, std::vector<Date> weeks, std::vector<std::string> conditions);

    std::size_t n_regions() const { return m_regions.size(); }
    std::size_t n_weeks() const { return m_weeks.size(); }
    std::size_t n_conditions() const { return m_conditions.size(); }

    const std::vector<RegionId>& regions() const { return m_regions; }
    const std::vector<Date>& weeks() const { return m_weeks; }
    const std::vector<std::string>& conditions() const { return m_conditions; }

    std::size_t condition_index(const std::string& name) const;

    double value(std::size_t condition, std::size_t region, std::size_t week) const {
        return m_values[offset(condition, region, week)];
    }
    void set_value(std::size_t condition, std::size_t region, std::size_t week, double v) {
        m_values[offset(condition, region, week)] = v;
    }

    /// Full-length series on the panel's week axis.
    std::span<const double> series(std::size_t condition, std::size_t region) const {
        return {m_values.data() + offset(condition, region, 0), m_weeks.size()};
    }
    std::span<double> series(std::size_t condition, std::size_t region) {
        return {m_values.data() + offset(condition, region, 0), m_weeks.size()};
    }

    const WeekSpan& coverage(std::size_t region) const { return m_coverage[region]; }
    void set_coverage(std::size_t region, WeekSpan span);

    std::size_t missing_count(std::size_t condition) const;
    std::size_t covered_cells() const;
    double missing_fraction(std::size_t condition) const;
    bool complete() const;

    /// Throws ValidationError if any invariant is violated.
    void validate() const;

    PanelDataset select_conditions(const std::vector<std::size_t>& keep) const;
    PanelDataset select_regions(const std::vector<std::size_t>& keep) const;

private:
    std::size_t offset(std::size_t c, std::size_t r, std::size_t w) const {
        return (c * m_regions.size() + r) * m_weeks.size() + w;
    }

    std::vector<RegionId> m_regions;
    std::vector<Date> m_weeks;
    std::vector<std::string> m_conditions;
    std::vector<WeekSpan> m_coverage;
    std::vector<double> m_values;
};

PanelDataset load_panel(std::istream& csv, const ConditionMapping& mapping, Aggregation agg = Aggregation::sum);

/// Reads a panel whose value columns are already conditions.
PanelDataset load_panel(std::istream& csv);

PanelDataset load_panel_file(const std::string& path, const ConditionMapping& mapping,
                             Aggregation agg = Aggregation::sum);
PanelDataset load_panel_file(const std::string& path);

void write_panel_csv(std::ostream& out, const PanelDataset& panel);

PanelDataset drop_sparse_conditions(const PanelDataset& panel, double max_missing_fraction);

/// Removes regions that still carry missing cells inside their coverage.
PanelDataset drop_incomplete_regions(const PanelDataset& panel);

/// Consecutive-week pairs per region. Row i pairs x0.row(i) (week t) with
/// x1.row(i) (week t + 1) of region row_region[i].
struct TransitionTable {
    std::vector<std::string> conditions;
    std::vector<RegionId> regions;
    std::vector<Date> weeks;
    std::vector<std::size_t> row_region;
    std::vector<std::size_t> row_week;  // index of the t1 week in `weeks`
    Eigen::MatrixXd x0;
    Eigen::MatrixXd x1;

    std::size_t rows() const { return static_cast<std::size_t>(x0.rows()); }
    std::size_t n_conditions() const { return conditions.size(); }
    std::size_t condition_index(const std::string& name) const;

    TransitionTable subset(std::span<const std::size_t> rows) const;
};

TransitionTable make_transition_table(const PanelDataset& panel);

}  // namespace panelbn

#endif  // PANELBN_DATA_MODEL_HPP
