#include <panelbn/imputation.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <panelbn/error.hpp>
#include <panelbn/parallel.hpp>
#include <panelbn/random.hpp>

namespace panelbn {

std::optional<std::vector<double>> impute_ewma(std::span<const double> series, std::size_t k) {
    if (k == 0) throw ValidationError("EWMA window half-width k must be at least 1");
    const std::size_t n = series.size();
    std::size_t observed = 0;
    for (double v : series) observed += is_missing(v) ? 0 : 1;
    if (observed < 2) return std::nullopt;

    std::vector<double> out(series.begin(), series.end());
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_missing(series[i])) continue;
        // Weights are taken relative to the nearest observed neighbour; the
        // ratio 2^-d1 : 2^-d2 is unchanged and wide windows cannot underflow.
        std::size_t nearest = 0;
        std::size_t window = k;
        for (std::size_t d = 1; nearest == 0; ++d) {
            if (d > i && i + d >= n) break;
            if ((d <= i && !is_missing(series[i - d])) || (i + d < n && !is_missing(series[i + d]))) nearest = d;
        }
        while (window < nearest) window *= 2;
        double num = 0.0, den = 0.0;
        for (std::size_t d = nearest; d <= window; ++d) {
            if (d > i && i + d >= n) break;
            const double weight = std::ldexp(1.0, -static_cast<int>(std::min<std::size_t>(d - nearest, 2000)));
            if (d <= i && !is_missing(series[i - d])) {
                num += weight * series[i - d];
                den += weight;
            }
            if (i + d < n && !is_missing(series[i + d])) {
                num += weight * series[i + d];
                den += weight;
            }
        }
        out[i] = num / den;
    }
    return out;
}

PanelImputation impute_panel(const PanelDataset& panel, std::size_t k, std::size_t threads) {
    PanelImputation result{panel, {}, 0};
    const std::size_t n_series = panel.n_conditions() * panel.n_regions();
    std::vector<char> dropped(n_series, 0);
    std::vector<std::size_t> filled(n_series, 0);

    parallel_for(n_series, threads, [&](std::size_t s) {
        const std::size_t c = s / panel.n_regions();
        const std::size_t r = s % panel.n_regions();
        const auto& cov = panel.coverage(r);
        auto src = panel.series(c, r).subspan(cov.first, cov.size());
        std::size_t missing = 0;
        for (double v : src) missing += is_missing(v) ? 1 : 0;
        if (missing == 0) return;
        auto imputed = impute_ewma(src, k);
        if (!imputed) {
            dropped[s] = 1;
            return;
        }
        std::copy(imputed->begin(), imputed->end(), result.panel.series(c, r).begin() + cov.first);
        filled[s] = missing;
    });

    for (std::size_t s = 0; s < n_series; ++s) {
        if (dropped[s]) result.dropped.push_back({s / panel.n_regions(), s % panel.n_regions()});
        result.n_imputed += filled[s];
    }
    return result;
}

MissingPattern parse_missing_pattern(const std::string& name) {
    if (name == "single") return MissingPattern::single;
    if (name == "batch4") return MissingPattern::batch4;
    throw ValidationError("unknown missingness pattern '" + name + "' (expected single or batch4)");
}

std::string to_string(MissingPattern p) { return p == MissingPattern::single ? "single" : "batch4"; }

std::size_t CellMask::count() const {
    return static_cast<std::size_t>(std::count(m_bits.begin(), m_bits.end(), 1));
}

namespace {

// k distinct sorted values from [0, n), uniformly (partial Fisher-Yates).
std::vector<std::size_t> sample_sorted(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        auto j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace

MaskedPanel inject_missing(const PanelDataset& panel, const MissingnessSpec& spec) {
    if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) throw ValidationError("missing fraction must lie in (0, 1)");
    if (!panel.complete()) throw PreconditionError("inject_missing requires a fully observed panel");

    const std::size_t unit = spec.pattern == MissingPattern::batch4 ? 4 : 1;
    std::size_t longest = 0;
    for (std::size_t r = 0; r < panel.n_regions(); ++r) longest = std::max(longest, panel.coverage(r).size());
    if (std::llround(spec.fraction * static_cast<double>(longest) / static_cast<double>(unit)) < 1)
        throw ValidationError("fraction too small: no series would receive a masked " +
                              std::string(unit == 1 ? "cell" : "run"));

    MaskedPanel out{panel, CellMask(panel.n_conditions(), panel.n_regions(), panel.n_weeks())};
    const std::size_t n_series = panel.n_conditions() * panel.n_regions();
    for (std::size_t s = 0; s < n_series; ++s) {
        const std::size_t c = s / panel.n_regions();
        const std::size_t r = s % panel.n_regions();
        const auto& cov = panel.coverage(r);
        const std::size_t len = cov.size();
        auto rng = make_rng(spec.seed, s);
        auto units = static_cast<std::size_t>(
            std::llround(spec.fraction * static_cast<double>(len) / static_cast<double>(unit)));
        if (units == 0) continue;
        std::vector<std::size_t> starts;
        if (unit == 1) {
            starts = sample_sorted(len, units, rng);
        } else {
            // Stars and bars: choosing `units` slots out of len - 3*units and
            // shifting the i-th by 3*i yields disjoint runs, uniformly.
            if (units * unit > len)
                throw PlacementError("cannot place " + std::to_string(units) + " disjoint 4-week runs in a series of " +
                                     std::to_string(len) + " weeks");
            starts = sample_sorted(len - (unit - 1) * units, units, rng);
            for (std::size_t i = 0; i < starts.size(); ++i) starts[i] += (unit - 1) * i;
        }
        for (auto start : starts)
            for (std::size_t j = 0; j < unit; ++j) {
                const std::size_t w = cov.first + start + j;
                out.mask.set(c, r, w);
                out.panel.set_value(c, r, w, missing_value);
            }
    }
    return out;
}

ImputationReport evaluate_imputation(const PanelDataset& truth, const PanelDataset& imputed, const CellMask& mask) {
    if (truth.n_conditions() != imputed.n_conditions() || truth.n_regions() != imputed.n_regions() ||
        truth.n_weeks() != imputed.n_weeks() || truth.conditions() != imputed.conditions() || !mask.matches(truth))
        throw ValidationError("truth, imputed panel and mask must share the same shape");

    ImputationReport report;
    double total = 0.0;
    std::size_t total_n = 0;
    for (std::size_t c = 0; c < truth.n_conditions(); ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < truth.n_regions(); ++r) {
            bool series_dropped = false;
            for (std::size_t w = 0; w < truth.n_weeks(); ++w) {
                if (!mask(c, r, w)) continue;
                double t = truth.value(c, r, w);
                double v = imputed.value(c, r, w);
                if (is_missing(t)) throw ValidationError("truth panel has a missing value at a masked cell");
                if (is_missing(v)) {
                    series_dropped = true;
                    continue;
                }
                ++report.n_imputed;
                if (t == 0.0) {
                    ++report.n_zero_truth;
                    continue;
                }
                sum += std::abs(v - t) / std::abs(t);
                ++n;
            }
            report.n_dropped_series += series_dropped ? 1 : 0;
        }
        report.per_condition_error[truth.conditions()[c]] = n > 0 ? sum / static_cast<double>(n) : 0.0;
        total += sum;
        total_n += n;
    }
    report.mean_relative_error = total_n > 0 ? total / static_cast<double>(total_n) : 0.0;
    return report;
}

}  // namespace panelbn
