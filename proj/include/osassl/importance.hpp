#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "osassl/core.hpp"
#include "osassl/parallel.hpp"

namespace osassl::importance {

enum class MeasureKind { spearman, correlation_ratio };

struct Measure {
    double rho = 0.0;
    bool degenerate = false;
};

/// Average ranks (1-based), ties sharing the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
            ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

/// |Pearson correlation|; degenerate when either input is constant.
inline Measure abs_pearson(std::span<const double> a, std::span<const double> b) {
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0))
        return {0.0, true};
    return {std::min(1.0, std::abs(sab) / std::sqrt(saa * sbb)), false};
}

inline Measure spearman_abs(std::span<const double> predictions, std::span<const double> covariate) {
    if (predictions.size() != covariate.size())
        throw Error("spearman_abs: sequences differ in length");
    if (predictions.size() < 3)
        throw Error("spearman_abs: at least 3 pairs required");
    const auto rp = average_ranks(predictions);
    const auto rc = average_ranks(covariate);
    return abs_pearson(rp, rc);
}

/// sqrt(between-level sum of squares / total sum of squares). Levels are
/// integer codes 0..levels-1.
inline Measure correlation_ratio(std::span<const double> predictions, std::span<const double> categories, int levels) {
    if (predictions.size() != categories.size())
        throw Error("correlation_ratio: sequences differ in length");
    if (levels < 2 || levels > 5)
        throw Error("correlation_ratio: levels must be 2..5");
    if (predictions.empty())
        throw Error("correlation_ratio: empty input");
    std::vector<double> sum(static_cast<std::size_t>(levels), 0.0);
    std::vector<double> cnt(static_cast<std::size_t>(levels), 0.0);
    double mean = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double c = categories[i];
        if (c != std::floor(c) || c < 0 || c >= levels)
            throw Error("correlation_ratio: invalid category code");
        sum[static_cast<std::size_t>(c)] += predictions[i];
        cnt[static_cast<std::size_t>(c)] += 1.0;
        mean += predictions[i];
    }
    mean /= static_cast<double>(predictions.size());
    double total = 0.0;
    for (double y : predictions)
        total += (y - mean) * (y - mean);
    if (!(total > 0.0))
        return {0.0, true};
    double between = 0.0;
    for (std::size_t l = 0; l < sum.size(); ++l)
        if (cnt[l] > 0.0) {
            const double d = sum[l] / cnt[l] - mean;
            between += cnt[l] * d * d;
        }
    return {std::min(1.0, std::sqrt(between / total)), false};
}

struct PermutationResult {
    double p_value = 1.0;
    double max_permuted = 0.0;
    std::size_t exceed = 0;  // permutations with statistic >= observed
};

/// statistic(predictions, covariate) evaluated on shuffled covariates.
using Statistic = std::function<Measure(std::span<const double>, std::span<const double>)>;

/// Add-one permutation p-value. Permutation i shuffles with its own
/// generator seeded from (seed, i), so results do not depend on `workers`.
inline PermutationResult permutation_test(const Statistic& statistic, std::span<const double> predictions,
                                          std::span<const double> covariate, std::size_t n_perm, std::uint64_t seed,
                                          std::size_t workers = 1) {
    if (n_perm < 1)
        throw Error("permutation_test: n_perm must be >= 1");
    const auto observed = statistic(predictions, covariate);
    PermutationResult res;
    if (observed.degenerate) {
        res.p_value = 1.0;
        return res;
    }
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(workers, n_perm));
    std::vector<std::size_t> exceed(chunks, 0);
    std::vector<double> max_stat(chunks, 0.0);
    parallel_for(chunks, workers, [&](std::size_t c) {
        std::vector<double> shuffled(covariate.begin(), covariate.end());
        for (std::size_t i = c; i < n_perm; i += chunks) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
            std::mt19937_64 rng(seq);
            std::copy(covariate.begin(), covariate.end(), shuffled.begin());
            for (std::size_t k = shuffled.size(); k > 1; --k) {
                const auto j = static_cast<std::size_t>(rng() % k);
                std::swap(shuffled[k - 1], shuffled[j]);
            }
            const double s = statistic(predictions, shuffled).rho;
            if (s >= observed.rho)
                ++exceed[c];
            max_stat[c] = std::max(max_stat[c], s);
        }
    });
    for (std::size_t c = 0; c < chunks; ++c) {
        res.exceed += exceed[c];
        res.max_permuted = std::max(res.max_permuted, max_stat[c]);
    }
    res.p_value = static_cast<double>(1 + res.exceed) / static_cast<double>(n_perm + 1);
    return res;
}

struct ImportanceScore {
    std::string covariate;
    std::string group;
    MeasureKind kind = MeasureKind::spearman;
    double rho = 0.0;
    bool degenerate = false;
    double p_value = 1.0;
    double max_permuted = 0.0;
};

struct ImportanceSettings {
    std::size_t n_perm = 10000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
};

/// Scores one covariate: Spearman for continuous, correlation ratio for
/// categorical. Ranks are computed once; permutations shuffle the ranks.
inline ImportanceScore score_covariate(const CovariateEntry& entry, std::span<const double> predictions,
                                       std::span<const double> values, const ImportanceSettings& settings) {
    ImportanceScore s;
    s.covariate = entry.name;
    s.group = entry.group;
    PermutationResult perm;
    if (entry.kind == CovariateKind::continuous) {
        s.kind = MeasureKind::spearman;
        const auto m = spearman_abs(predictions, values);
        s.rho = m.rho;
        s.degenerate = m.degenerate;
        const auto rp = average_ranks(predictions);
        const auto rc = average_ranks(values);
        perm = permutation_test([](auto a, auto b) { return abs_pearson(a, b); }, rp, rc, settings.n_perm,
                                settings.seed, settings.workers);
    } else {
        s.kind = MeasureKind::correlation_ratio;
        const int levels = entry.levels;
        const auto m = correlation_ratio(predictions, values, levels);
        s.rho = m.rho;
        s.degenerate = m.degenerate;
        perm = permutation_test([levels](auto a, auto b) { return correlation_ratio(a, b, levels); }, predictions,
                                values, settings.n_perm, settings.seed, settings.workers);
    }
    s.p_value = perm.p_value;
    s.max_permuted = perm.max_permuted;
    return s;
}

struct GroupSummary {
    std::string group;
    std::size_t members = 0;
    double max_rho = 0.0;
    double mean_rho = 0.0;
    std::size_t significant = 0;
    bool all_significant = false;
};

/// Per-group summaries. `groups` maps every covariate name to its group.
inline std::vector<GroupSummary> group_report(const std::vector<ImportanceScore>& scores,
                                              const std::map<std::string, std::string>& groups, double alpha = 0.05) {
    std::map<std::string, GroupSummary> acc;
    std::vector<std::string> order;
    for (const auto& s : scores) {
        const auto it = groups.find(s.covariate);
        if (it == groups.end())
            throw Error("group_report: covariate '" + s.covariate + "' is not assigned to a group");
        auto [g, inserted] = acc.try_emplace(it->second);
        if (inserted) {
            g->second.group = it->second;
            order.push_back(it->second);
        }
        auto& sum = g->second;
        sum.members += 1;
        sum.max_rho = sum.members == 1 ? s.rho : std::max(sum.max_rho, s.rho);
        sum.mean_rho += s.rho;
        if (s.p_value <= alpha)
            sum.significant += 1;
    }
    std::vector<GroupSummary> out;
    for (const auto& name : order) {
        auto g = acc.at(name);
        g.mean_rho /= static_cast<double>(g.members);
        g.all_significant = g.significant == g.members;
        out.push_back(g);
    }
    return out;
}

inline std::map<std::string, std::string> schema_groups(const CovariateSchema& schema) {
    std::map<std::string, std::string> g;
    for (const auto& e : schema.entries())
        g[e.name] = e.group;
    return g;
}

}  // namespace osassl::importance
