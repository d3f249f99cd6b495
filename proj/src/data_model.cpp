#include <panelbn/data_model.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include <panelbn/error.hpp>

namespace panelbn {

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", line_no);
    fields.push_back(std::move(field));
    return fields;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double parse_cell(const std::string& raw, std::size_t line_no, const std::string& column) {
    std::string text = trim(raw);
    if (text.empty()) return missing_value;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError("column '" + column + "': not a number: '" + text + "'", line_no);
    if (!std::isfinite(v)) throw ParseError("column '" + column + "': non-finite value", line_no);
    if (v < 0.0) throw ParseError("column '" + column + "': negative frequency " + text, line_no);
    return v;
}

struct RawRow {
    RegionId region;
    Date date;
    std::vector<double> values;  // one per condition
    std::size_t line;
};

PanelDataset assemble(std::vector<RawRow> rows, std::vector<std::string> conditions) {
    std::set<RegionId> region_set;
    std::set<Date> date_set;
    for (const auto& r : rows) {
        region_set.insert(r.region);
        date_set.insert(r.date);
    }
    std::vector<RegionId> regions(region_set.begin(), region_set.end());
    std::vector<Date> weeks(date_set.begin(), date_set.end());
    for (std::size_t w = 1; w < weeks.size(); ++w) {
        auto gap = (weeks[w] - weeks[w - 1]).count();
        if (gap != 7)
            throw ValidationError("weeks " + format_iso_date(weeks[w - 1]) + " and " + format_iso_date(weeks[w]) +
                                  " are " + std::to_string(gap) + " days apart, expected 7");
    }

    std::map<RegionId, std::size_t> region_index;
    for (std::size_t i = 0; i < regions.size(); ++i) region_index[regions[i]] = i;

    PanelDataset panel(regions, weeks, conditions);
    std::vector<WeekSpan> span(regions.size(), WeekSpan{weeks.size(), 0});
    std::vector<std::vector<bool>> seen(regions.size(), std::vector<bool>(weeks.size(), false));
    std::vector<std::size_t> seen_line(regions.size() * weeks.size(), 0);

    for (const auto& row : rows) {
        std::size_t r = region_index[row.region];
        std::size_t w = static_cast<std::size_t>((row.date - weeks.front()).count() / 7);
        if (seen[r][w])
            throw ValidationError("duplicate row for region " + row.region.to_string() + " week " +
                                  format_iso_date(row.date) + " (lines " +
                                  std::to_string(seen_line[r * weeks.size() + w]) + " and " +
                                  std::to_string(row.line) + ")");
        seen[r][w] = true;
        seen_line[r * weeks.size() + w] = row.line;
        span[r].first = std::min(span[r].first, w);
        span[r].last = std::max(span[r].last, w + 1);
        for (std::size_t c = 0; c < conditions.size(); ++c) panel.set_value(c, r, w, row.values[c]);
    }
    for (std::size_t r = 0; r < regions.size(); ++r) panel.set_coverage(r, span[r]);
    return panel;
}

PanelDataset load_impl(std::istream& csv, const ConditionMapping* mapping, Aggregation agg) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(csv, line)) throw ParseError("empty input, expected a header", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
    auto header = split_csv_line(line, line_no);
    for (auto& h : header) h = trim(h);
    if (header.size() < 3 || header[0] != "date" || header[1] != "state_code" || header[2] != "county_code")
        throw ParseError("header must start with date,state_code,county_code", line_no);

    std::unordered_map<std::string, std::size_t> column_index;
    for (std::size_t i = 3; i < header.size(); ++i) {
        if (!column_index.emplace(header[i], i).second)
            throw ParseError("duplicate column '" + header[i] + "'", line_no);
    }

    ConditionMapping identity;
    if (mapping == nullptr) {
        identity = ConditionMapping::identity({header.begin() + 3, header.end()});
        mapping = &identity;
    }
    if (mapping->empty()) throw ConfigurationError("condition mapping is empty");

    std::vector<std::vector<std::size_t>> sources;
    for (const auto& [condition, columns] : mapping->entries()) {
        std::vector<std::size_t> idx;
        for (const auto& col : columns) {
            auto it = column_index.find(col);
            if (it == column_index.end())
                throw ConfigurationError("mapping for " + condition + " references unknown column '" + col + "'");
            idx.push_back(it->second);
        }
        sources.push_back(std::move(idx));
    }

    std::vector<RawRow> rows;
    while (std::getline(csv, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line, line_no);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        RawRow row;
        row.line = line_no;
        try {
            row.date = parse_iso_date(trim(fields[0]));
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line_no);
        }
        row.region = RegionId{trim(fields[1]), trim(fields[2])};
        if (row.region.state.empty() || row.region.county.empty())
            throw ParseError("empty state_code or county_code", line_no);

        std::vector<double> raw(header.size(), missing_value);
        for (std::size_t i = 3; i < header.size(); ++i) raw[i] = parse_cell(fields[i], line_no, header[i]);

        row.values.reserve(sources.size());
        for (const auto& idx : sources) {
            double total = 0.0;
            bool any = false;
            for (auto i : idx) {
                if (!is_missing(raw[i])) {
                    total += raw[i];
                    any = true;
                }
            }
            if (!any) {
                row.values.push_back(missing_value);
            } else {
                row.values.push_back(agg == Aggregation::mean ? total / static_cast<double>(idx.size()) : total);
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError("panel has no data rows");
    return assemble(std::move(rows), mapping->conditions());
}

}  // namespace

Date parse_iso_date(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    if (text.size() != 10 || std::sscanf(text.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3)
        throw ValidationError("invalid ISO-8601 date '" + text + "'");
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw ValidationError("invalid calendar date '" + text + "'");
    return Date{ymd};
}

std::string format_iso_date(Date d) {
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

ConditionMapping::ConditionMapping(std::vector<Entry> entries) : m_entries(std::move(entries)) {
    std::set<std::string> names;
    std::map<std::string, std::string> owner;
    for (const auto& [condition, columns] : m_entries) {
        if (condition.empty()) throw ConfigurationError("condition name must be nonempty");
        if (!names.insert(condition).second) throw ConfigurationError("duplicate condition '" + condition + "'");
        if (columns.empty()) throw ConfigurationError("condition '" + condition + "' maps to no columns");
        for (const auto& col : columns) {
            auto [it, inserted] = owner.emplace(col, condition);
            if (!inserted)
                throw ConfigurationError("column '" + col + "' mapped to both " + it->second + " and " + condition);
        }
    }
}

ConditionMapping ConditionMapping::from_json(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(std::string("mapping is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigurationError("mapping must be a JSON object");
    std::vector<Entry> entries;
    for (const auto& [key, value] : j.items()) {
        if (!value.is_array()) throw ConfigurationError("mapping for '" + key + "' must be an array of column names");
        std::vector<std::string> cols;
        for (const auto& v : value) {
            if (!v.is_string()) throw ConfigurationError("mapping for '" + key + "' must contain strings");
            cols.push_back(v.get<std::string>());
        }
        entries.emplace_back(key, std::move(cols));
    }
    return ConditionMapping(std::move(entries));
}

ConditionMapping ConditionMapping::identity(const std::vector<std::string>& columns) {
    std::vector<Entry> entries;
    for (const auto& c : columns) entries.emplace_back(c, std::vector<std::string>{c});
    return ConditionMapping(std::move(entries));
}

std::vector<std::string> ConditionMapping::conditions() const {
    std::vector<std::string> out;
    for (const auto& e : m_entries) out.push_back(e.first);
    return out;
}

PanelDataset::PanelDataset(std::vector<RegionId> regions, std::vector<Date> weeks, std::vector<std::string> conditions)
    : m_regions(std::move(regions)),
      m_weeks(std::move(weeks)),
      m_conditions(std::move(conditions)),
      m_coverage(m_regions.size(), WeekSpan{0, m_weeks.size()}),
      m_values(m_regions.size() * m_weeks.size() * m_conditions.size(), missing_value) {}

std::size_t PanelDataset::condition_index(const std::string& name) const {
    auto it = std::find(m_conditions.begin(), m_conditions.end(), name);
    if (it == m_conditions.end()) throw ValidationError("unknown condition '" + name + "'");
    return static_cast<std::size_t>(it - m_conditions.begin());
}

void PanelDataset::set_coverage(std::size_t region, WeekSpan span) {
    if (span.last > m_weeks.size() || span.first > span.last)
        throw ValidationError("coverage out of range for region " + m_regions.at(region).to_string());
    m_coverage.at(region) = span;
}

std::size_t PanelDataset::missing_count(std::size_t condition) const {
    std::size_t count = 0;
    for (std::size_t r = 0; r < n_regions(); ++r) {
        auto s = series(condition, r);
        const auto& cov = m_coverage[r];
        for (std::size_t w = cov.first; w < cov.last; ++w) count += is_missing(s[w]) ? 1 : 0;
    }
    return count;
}

std::size_t PanelDataset::covered_cells() const {
    std::size_t total = 0;
    for (const auto& c : m_coverage) total += c.size();
    return total;
}

double PanelDataset::missing_fraction(std::size_t condition) const {
    auto cells = covered_cells();
    return cells == 0 ? 0.0 : static_cast<double>(missing_count(condition)) / static_cast<double>(cells);
}

bool PanelDataset::complete() const {
    for (std::size_t c = 0; c < n_conditions(); ++c)
        if (missing_count(c) > 0) return false;
    return true;
}

void PanelDataset::validate() const {
    for (std::size_t w = 1; w < m_weeks.size(); ++w)
        if ((m_weeks[w] - m_weeks[w - 1]).count() != 7)
            throw ValidationError("weeks must be strictly increasing and spaced 7 days apart");
    if (!std::is_sorted(m_regions.begin(), m_regions.end()) ||
        std::adjacent_find(m_regions.begin(), m_regions.end()) != m_regions.end())
        throw ValidationError("regions must be unique and sorted");
    for (std::size_t c = 0; c < n_conditions(); ++c)
        for (std::size_t r = 0; r < n_regions(); ++r)
            for (double v : series(c, r))
                if (!is_missing(v) && !(v >= 0.0 && std::isfinite(v)))
                    throw ValidationError("negative or non-finite value in condition " + m_conditions[c]);
}

PanelDataset PanelDataset::select_conditions(const std::vector<std::size_t>& keep) const {
    std::vector<std::string> names;
    for (auto c : keep) names.push_back(m_conditions.at(c));
    PanelDataset out(m_regions, m_weeks, names);
    out.m_coverage = m_coverage;
    for (std::size_t i = 0; i < keep.size(); ++i)
        for (std::size_t r = 0; r < n_regions(); ++r) {
            auto src = series(keep[i], r);
            std::copy(src.begin(), src.end(), out.series(i, r).begin());
        }
    return out;
}

PanelDataset PanelDataset::select_regions(const std::vector<std::size_t>& keep) const {
    std::vector<RegionId> regions;
    for (auto r : keep) regions.push_back(m_regions.at(r));
    PanelDataset out(regions, m_weeks, m_conditions);
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.m_coverage[i] = m_coverage[keep[i]];
        for (std::size_t c = 0; c < n_conditions(); ++c) {
            auto src = series(c, keep[i]);
            std::copy(src.begin(), src.end(), out.series(c, i).begin());
        }
    }
    return out;
}

PanelDataset load_panel(std::istream& csv, const ConditionMapping& mapping, Aggregation agg) {
    return load_impl(csv, &mapping, agg);
}

PanelDataset load_panel(std::istream& csv) { return load_impl(csv, nullptr, Aggregation::sum); }

PanelDataset load_panel_file(const std::string& path, const ConditionMapping& mapping, Aggregation agg) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    return load_panel(in, mapping, agg);
}

PanelDataset load_panel_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    return load_panel(in);
}

void write_panel_csv(std::ostream& out, const PanelDataset& panel) {
    out << "date,state_code,county_code";
    for (const auto& c : panel.conditions()) out << ',' << c;
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < panel.n_regions(); ++r) {
        const auto& cov = panel.coverage(r);
        for (std::size_t w = cov.first; w < cov.last; ++w) {
            out << format_iso_date(panel.weeks()[w]) << ',' << panel.regions()[r].state << ','
                << panel.regions()[r].county;
            for (std::size_t c = 0; c < panel.n_conditions(); ++c) {
                out << ',';
                double v = panel.value(c, r, w);
                if (!is_missing(v)) {
                    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
                    out.write(buf, ptr - buf);
                }
            }
            out << '\n';
        }
    }
}

PanelDataset drop_sparse_conditions(const PanelDataset& panel, double max_missing_fraction) {
    if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0))
        throw ValidationError("max_missing_fraction must lie in [0, 1]");
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < panel.n_conditions(); ++c)
        if (panel.missing_fraction(c) <= max_missing_fraction) keep.push_back(c);
    if (keep.empty()) throw EmptyModelError("every condition exceeds the missing-data cutoff");
    return panel.select_conditions(keep);
}

PanelDataset drop_incomplete_regions(const PanelDataset& panel) {
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < panel.n_regions(); ++r) {
        const auto& cov = panel.coverage(r);
        bool ok = true;
        for (std::size_t c = 0; c < panel.n_conditions() && ok; ++c)
            for (std::size_t w = cov.first; w < cov.last && ok; ++w) ok = !is_missing(panel.value(c, r, w));
        if (ok) keep.push_back(r);
    }
    return panel.select_regions(keep);
}

std::size_t TransitionTable::condition_index(const std::string& name) const {
    auto it = std::find(conditions.begin(), conditions.end(), name);
    if (it == conditions.end()) throw ValidationError("unknown condition '" + name + "'");
    return static_cast<std::size_t>(it - conditions.begin());
}

TransitionTable TransitionTable::subset(std::span<const std::size_t> rows) const {
    TransitionTable out;
    out.conditions = conditions;
    out.regions = regions;
    out.weeks = weeks;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.x0.resize(n, x0.cols());
    out.x1.resize(n, x1.cols());
    out.row_region.reserve(rows.size());
    out.row_week.reserve(rows.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        auto src = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
        out.x0.row(i) = x0.row(src);
        out.x1.row(i) = x1.row(src);
        out.row_region.push_back(row_region[static_cast<std::size_t>(src)]);
        out.row_week.push_back(row_week[static_cast<std::size_t>(src)]);
    }
    return out;
}

TransitionTable make_transition_table(const PanelDataset& panel) {
    const std::size_t p = panel.n_conditions();
    if (p == 0) throw EmptyModelError("panel has no conditions");
    for (std::size_t r = 0; r < panel.n_regions(); ++r) {
        const auto& cov = panel.coverage(r);
        for (std::size_t w = cov.first; w < cov.last; ++w)
            for (std::size_t c = 0; c < p; ++c)
                if (is_missing(panel.value(c, r, w)))
                    throw PreconditionError("missing value at region " + panel.regions()[r].to_string() + ", week " +
                                            format_iso_date(panel.weeks()[w]) + ", condition " +
                                            panel.conditions()[c]);
    }
    std::size_t n = 0;
    for (std::size_t r = 0; r < panel.n_regions(); ++r) {
        auto len = panel.coverage(r).size();
        n += len > 0 ? len - 1 : 0;
    }
    if (n == 0) throw InsufficientDataError("insufficient time points: no region spans two consecutive weeks");

    TransitionTable t;
    t.conditions = panel.conditions();
    t.regions = panel.regions();
    t.weeks = panel.weeks();
    t.x0.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    t.x1.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    t.row_region.reserve(n);
    t.row_week.reserve(n);
    Eigen::Index row = 0;
    for (std::size_t r = 0; r < panel.n_regions(); ++r) {
        const auto& cov = panel.coverage(r);
        for (std::size_t w = cov.first; w + 1 < cov.last; ++w) {
            for (std::size_t c = 0; c < p; ++c) {
                t.x0(row, static_cast<Eigen::Index>(c)) = panel.value(c, r, w);
                t.x1(row, static_cast<Eigen::Index>(c)) = panel.value(c, r, w + 1);
            }
            t.row_region.push_back(r);
            t.row_week.push_back(w + 1);
            ++row;
        }
    }
    return t;
}

}  // namespace panelbn
