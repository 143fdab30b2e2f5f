#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "osassl/core.hpp"

namespace osassl::features {

inline constexpr std::size_t kPeriodsPerYear = 36;

using YearSwi = std::array<double, kPeriodsPerYear>;
using QuarterMeans = std::array<double, 4>;

/// Ten-day periods 10..27 approximate April 1 - September 30.
inline constexpr std::size_t kDryFirst = 10;
inline constexpr std::size_t kDryLast = 27;

/// Quarter (1..4) of a ten-day period (1..36).
constexpr int quarter_of(std::size_t period) { return static_cast<int>((period - 1) / 9) + 1; }

// ============================================================================
// Grid-to-city aggregation
// ============================================================================

/// Gridded SWI: per cell, per year, 36 ten-day values.
class GridSwi {
public:
    void set(std::int64_t cell, std::int64_t year, std::size_t period, double swi) {
        if (period < 1 || period > kPeriodsPerYear)
            throw Error("grid swi: period " + std::to_string(period) + " outside 1..36");
        if (!std::isfinite(swi))
            throw Error("grid swi: non-finite value");
        auto& entry = values_[{cell, year}];
        entry.values[period - 1] = swi;
        entry.present[period - 1] = true;
    }

    void set_year(std::int64_t cell, std::int64_t year, const YearSwi& series) {
        for (std::size_t p = 0; p < kPeriodsPerYear; ++p)
            set(cell, year, p + 1, series[p]);
    }

    /// Complete 36-period series of a cell; throws if absent or incomplete.
    const YearSwi& series(std::int64_t cell, std::int64_t year) const {
        const auto it = values_.find({cell, year});
        if (it == values_.end())
            throw Error("grid swi: missing cell " + std::to_string(cell) + " for year " + std::to_string(year));
        for (bool b : it->second.present)
            if (!b)
                throw Error("grid swi: incomplete periods for cell " + std::to_string(cell) + " year " +
                            std::to_string(year));
        return it->second.values;
    }

    std::vector<std::int64_t> years() const {
        std::vector<std::int64_t> out;
        for (const auto& [key, _] : values_)
            out.push_back(key.second);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    struct Entry {
        YearSwi values{};
        std::array<bool, kPeriodsPerYear> present{};
    };
    std::map<std::pair<std::int64_t, std::int64_t>, Entry> values_;
};

struct CellOverlap {
    std::int64_t cell = 0;
    double area = 0.0;
};

class OverlapWeights {
public:
    void add(std::int64_t city, std::int64_t cell, double area) {
        if (!(area >= 0.0) || !std::isfinite(area))
            throw Error("overlap: intersection area must be finite and nonnegative");
        weights_[city].push_back({cell, area});
    }

    const std::vector<CellOverlap>& of(std::int64_t city) const {
        const auto it = weights_.find(city);
        if (it == weights_.end())
            throw Error("overlap: no weights for city " + std::to_string(city));
        return it->second;
    }

    std::vector<std::int64_t> cities() const {
        std::vector<std::int64_t> out;
        for (const auto& [c, _] : weights_)
            out.push_back(c);
        return out;
    }

private:
    std::map<std::int64_t, std::vector<CellOverlap>> weights_;
};

/// Area-weighted convex average of the overlapping cells' SWIs, per period.
inline YearSwi aggregate_swi(const GridSwi& grid, const OverlapWeights& weights, std::int64_t city,
                             std::int64_t year) {
    const auto& cells = weights.of(city);
    double total = 0.0;
    for (const auto& c : cells)
        total += c.area;
    if (!(total > 0.0))
        throw Error("aggregate_swi: zero total intersection area for city " + std::to_string(city));
    YearSwi out{};
    for (const auto& c : cells) {
        if (c.area == 0.0)
            continue;
        const double w = c.area / total;
        const auto& s = grid.series(c.cell, year);
        for (std::size_t p = 0; p < kPeriodsPerYear; ++p)
            out[p] += w * s[p];
    }
    return out;
}

// ============================================================================
// SWI feature block
// ============================================================================

inline constexpr std::size_t kSwiBlockSize = 3 * kPeriodsPerYear + 9 + 3;

struct SeriesSummary {
    double min = 0.0;
    double mean = 0.0;
    double sd = 0.0;  // population convention
};

inline SeriesSummary summarize(std::span<const double> v) {
    SeriesSummary s;
    s.min = *std::min_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v)
        sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size()));
    return s;
}

/// Feature names of build_swi_block, in output order.
inline std::vector<std::string> swi_block_names(const std::string& prefix = "swi") {
    std::vector<std::string> names;
    const char* lag[3] = {"t", "t1", "t2"};
    for (int y = 0; y < 3; ++y)
        for (std::size_t p = 1; p <= kPeriodsPerYear; ++p)
            names.push_back(prefix + "_" + lag[y] + "_p" + std::to_string(p));
    for (int y = 0; y < 3; ++y)
        for (const char* stat : {"min", "mean", "sd"})
            names.push_back(prefix + "_" + lag[y] + "_" + stat);
    for (const char* w : {"dry_t", "dry_t_t1", "dry_t_t2"})
        names.push_back(prefix + "_" + w);
    return names;
}

/// 108 raw values (years t, t-1, t-2), then min/mean/sd per year, then the
/// dry-season means over years {t}, {t, t-1} and {t, t-1, t-2}.
inline std::vector<double> build_swi_block(const YearSwi& year_t, const YearSwi& year_t1, const YearSwi& year_t2) {
    const YearSwi* years[3] = {&year_t, &year_t1, &year_t2};
    std::vector<double> out;
    out.reserve(kSwiBlockSize);
    for (const auto* y : years) {
        for (double v : *y)
            if (!std::isfinite(v))
                throw Error("build_swi_block: incomplete SWI series");
        out.insert(out.end(), y->begin(), y->end());
    }
    for (const auto* y : years) {
        const auto s = summarize(*y);
        out.push_back(s.min);
        out.push_back(s.mean);
        out.push_back(s.sd);
    }
    double dry_sum = 0.0;
    std::size_t dry_n = 0;
    for (const auto* y : years) {
        for (std::size_t p = kDryFirst; p <= kDryLast; ++p)
            dry_sum += (*y)[p - 1];
        dry_n += kDryLast - kDryFirst + 1;
        out.push_back(dry_sum / static_cast<double>(dry_n));
    }
    return out;
}

// ============================================================================
// Quarter CDFs
// ============================================================================

inline QuarterMeans quarter_means(const YearSwi& series) {
    QuarterMeans q{};
    for (std::size_t p = 1; p <= kPeriodsPerYear; ++p)
        q[static_cast<std::size_t>(quarter_of(p) - 1)] += series[p - 1];
    for (auto& v : q)
        v /= 9.0;
    return q;
}

/// Empirical CDFs of historical quarter-mean SWIs, one per quarter.
class QuarterCdf {
public:
    QuarterCdf() = default;

    explicit QuarterCdf(std::array<std::vector<double>, 4> samples) : sorted_(std::move(samples)) {
        for (std::size_t q = 0; q < 4; ++q) {
            if (sorted_[q].empty())
                throw Error("fit_quarter_cdfs: empty quarter " + std::to_string(q + 1));
            std::sort(sorted_[q].begin(), sorted_[q].end());
        }
    }

    /// F_q(x): fraction of historical values <= x. q in 1..4.
    double operator()(int q, double x) const {
        if (q < 1 || q > 4)
            throw Error("quarter cdf: quarter must be 1..4");
        const auto& s = sorted_[static_cast<std::size_t>(q - 1)];
        const auto n_le = std::upper_bound(s.begin(), s.end(), x) - s.begin();
        return static_cast<double>(n_le) / static_cast<double>(s.size());
    }

    std::size_t sample_size(int q) const { return sorted_[static_cast<std::size_t>(q - 1)].size(); }

private:
    std::array<std::vector<double>, 4> sorted_;
};

inline QuarterCdf fit_quarter_cdfs(std::span<const QuarterMeans> history) {
    std::array<std::vector<double>, 4> samples;
    for (const auto& qm : history)
        for (std::size_t q = 0; q < 4; ++q)
            samples[q].push_back(qm[q]);
    return QuarterCdf(std::move(samples));
}

inline std::vector<std::string> cdf_probability_names(const std::string& prefix = "swi_cdf") {
    std::vector<std::string> names;
    for (const char* lag : {"t", "t1", "t2"})
        for (int q = 1; q <= 4; ++q)
            names.push_back(prefix + "_" + lag + "_q" + std::to_string(q));
    return names;
}

/// F_q of the quarter means of years t, t-1, t-2; year-major, quarters 1..4.
inline std::vector<double> cdf_probabilities(const QuarterCdf& cdfs, const QuarterMeans& year_t,
                                             const QuarterMeans& year_t1, const QuarterMeans& year_t2) {
    std::vector<double> out;
    out.reserve(12);
    for (const auto* qm : {&year_t, &year_t1, &year_t2})
        for (int q = 1; q <= 4; ++q)
            out.push_back(cdfs(q, (*qm)[static_cast<std::size_t>(q - 1)]));
    return out;
}

// ============================================================================
// Compound covariates
// ============================================================================

struct HouseRecord {
    std::int64_t house = 0;
    std::int64_t city = 0;
    std::int64_t year = 0;
    double insured_sum = 0.0;
    std::array<double, 3> attr{};  // mean SWI of the house's cell, clay hazard level, ground slope
};

struct CompoundCovariates {
    /// attr1, attr2, attr3, attr1*attr2, attr1*attr3, attr1*attr2*attr3.
    std::array<double, 6> weighted_means{};
    /// Per base attribute, K empirical quantiles of {s_h * C_h}.
    std::array<std::vector<double>, 3> quantiles;
};

/// Type-1 (inverse empirical CDF) quantiles at probabilities i/(K+1), i = 1..K.
inline std::vector<double> evenly_spaced_quantiles(std::vector<double> values, std::size_t count) {
    if (values.empty())
        throw Error("quantiles: empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = 1; i <= count; ++i) {
        // smallest order statistic j with j/n >= i/(K+1)
        const std::size_t j = (n * i + count) / (count + 1);
        out.push_back(values[std::max<std::size_t>(j, 1) - 1]);
    }
    return out;
}

inline std::vector<std::string> compound_names(std::size_t quantile_count, const std::string& prefix = "cmp") {
    std::vector<std::string> names;
    for (const char* m : {"attr1", "attr2", "attr3", "attr1x2", "attr1x3", "attr1x2x3"})
        names.push_back(prefix + "_wmean_" + m);
    for (int a = 1; a <= 3; ++a)
        for (std::size_t i = 1; i <= quantile_count; ++i)
            names.push_back(prefix + "_q_attr" + std::to_string(a) + "_" + std::to_string(i));
    return names;
}

inline CompoundCovariates compound_covariates(std::span<const HouseRecord> houses, std::size_t quantile_count = 29) {
    if (houses.empty())
        throw Error("compound_covariates: empty house set");
    if (quantile_count == 0)
        throw Error("compound_covariates: quantile count must be positive");
    CompoundCovariates out;
    double weight = 0.0;
    std::array<double, 6> acc{};
    std::array<std::vector<double>, 3> scaled;
    for (const auto& h : houses) {
        if (!(h.insured_sum > 0.0) || !std::isfinite(h.insured_sum))
            throw Error("compound_covariates: insured sum must be positive (house " + std::to_string(h.house) + ")");
        const auto& c = h.attr;
        const std::array<double, 6> terms{c[0], c[1], c[2], c[0] * c[1], c[0] * c[2], c[0] * c[1] * c[2]};
        for (std::size_t k = 0; k < 6; ++k)
            acc[k] += h.insured_sum * terms[k];
        weight += h.insured_sum;
        for (std::size_t a = 0; a < 3; ++a)
            scaled[a].push_back(h.insured_sum * c[a]);
    }
    for (std::size_t k = 0; k < 6; ++k)
        out.weighted_means[k] = acc[k] / weight;
    for (std::size_t a = 0; a < 3; ++a)
        out.quantiles[a] = evenly_spaced_quantiles(std::move(scaled[a]), quantile_count);
    return out;
}

}  // namespace osassl::features
