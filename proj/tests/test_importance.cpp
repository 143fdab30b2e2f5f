#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "osassl/importance.hpp"
#include "support.hpp"

using namespace osassl;
using namespace osassl::importance;
using testing_support::rel_close;

namespace {

std::vector<double> uniform(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> v(n);
    for (auto& x : v)
        x = u(rng);
    return v;
}

/// Ranks by counting: rank = #less + (#equal + 1) / 2.
std::vector<double> rank_oracle(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (double w : v) {
            less += w < v[i];
            equal += w == v[i];
        }
        r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
}

double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
    }
    const double ma = sa / n, mb = sb / n;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Spearman, MonotonePairs) {
    std::vector<double> c{0.1, 0.5, 0.7, 2.0, 3.5}, up, down;
    for (double x : c) {
        up.push_back(std::exp(x));
        down.push_back(-x * x * x);
    }
    EXPECT_DOUBLE_EQ(spearman_abs(up, c).rho, 1.0);
    EXPECT_DOUBLE_EQ(spearman_abs(down, c).rho, 1.0);
}

TEST(Spearman, MatchesRankThenPearson) {
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 50; ++rep) {
        auto a = uniform(20, rng), b = uniform(20, rng);
        for (auto& x : b)
            x = std::round(x * 5) / 5;  // ties
        const double expect = std::abs(pearson_oracle(rank_oracle(a), rank_oracle(b)));
        EXPECT_TRUE(rel_close(spearman_abs(a, b).rho, expect, 1e-12));
    }
}

TEST(Spearman, DegenerateAndErrors) {
    const std::vector<double> a{1, 2, 3, 4}, c{5, 5, 5, 5};
    const auto m = spearman_abs(a, c);
    EXPECT_EQ(m.rho, 0.0);
    EXPECT_TRUE(m.degenerate);
    EXPECT_THROW(spearman_abs(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
    EXPECT_THROW(spearman_abs(a, std::vector<double>{1, 2, 3}), Error);
}

TEST(Spearman, InvariantUnderMonotoneTransforms) {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        auto a = uniform(30, rng), b = uniform(30, rng);
        std::vector<double> ta, tb;
        for (double x : a)
            ta.push_back(std::log(x + 0.01));
        for (double x : b)
            tb.push_back(3.0 * x * x * x + 1.0);
        EXPECT_TRUE(rel_close(spearman_abs(a, b).rho, spearman_abs(ta, tb).rho, 1e-12));
    }
}

TEST(CorrelationRatio, Extremes) {
    const std::vector<double> cats{0, 1, 2, 0, 1, 2};
    const std::vector<double> equal_means{1, 2, 3, 3, 2, 1};
    EXPECT_NEAR(correlation_ratio(equal_means, cats, 3).rho, 0.0, 1e-15);
    const std::vector<double> within{4, 7, 1, 4, 7, 1};
    EXPECT_DOUBLE_EQ(correlation_ratio(within, cats, 3).rho, 1.0);
    const std::vector<double> flat{2, 2, 2, 2, 2, 2};
    const auto m = correlation_ratio(flat, cats, 3);
    EXPECT_EQ(m.rho, 0.0);
    EXPECT_TRUE(m.degenerate);
}

TEST(CorrelationRatio, MatchesAnova) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const auto y = uniform(30, rng);
        std::vector<double> cats(30);
        for (auto& c : cats)
            c = static_cast<double>(rng() % 3);
        double mean = 0;
        for (double v : y)
            mean += v / 30.0;
        double total = 0, between = 0;
        for (double v : y)
            total += (v - mean) * (v - mean);
        for (int l = 0; l < 3; ++l) {
            double s = 0, n = 0;
            for (std::size_t i = 0; i < 30; ++i)
                if (cats[i] == l) {
                    s += y[i];
                    n += 1;
                }
            if (n > 0)
                between += n * (s / n - mean) * (s / n - mean);
        }
        EXPECT_TRUE(rel_close(correlation_ratio(y, cats, 3).rho, std::sqrt(between / total), 1e-12));
    }
}

TEST(CorrelationRatio, InvariantUnderRelabeling) {
    std::mt19937_64 rng(4);
    const auto y = uniform(40, rng);
    std::vector<double> cats(40), relabeled(40);
    const double perm[4] = {2, 0, 3, 1};
    for (std::size_t i = 0; i < 40; ++i) {
        cats[i] = static_cast<double>(rng() % 4);
        relabeled[i] = perm[static_cast<int>(cats[i])];
    }
    EXPECT_TRUE(rel_close(correlation_ratio(y, cats, 4).rho, correlation_ratio(y, relabeled, 4).rho, 1e-12));
}

TEST(CorrelationRatio, Errors) {
    const std::vector<double> y{1, 2, 3};
    EXPECT_THROW(correlation_ratio(y, std::vector<double>{0, 1, 6}, 3), Error);
    EXPECT_THROW(correlation_ratio(y, std::vector<double>{0, 1, 0}, 6), Error);
    EXPECT_THROW(correlation_ratio(y, std::vector<double>{0, 1}, 2), Error);
}

TEST(Measures, BoundedOnRandomInputs) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 200; ++rep) {
        const auto a = uniform(12, rng), b = uniform(12, rng);
        const double s = spearman_abs(a, b).rho;
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
        std::vector<double> cats(12);
        for (auto& c : cats)
            c = static_cast<double>(rng() % 5);
        const double r = correlation_ratio(a, cats, 5).rho;
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, 1.0);
    }
}

TEST(Permutation, ExceedingEveryPermutation) {
    std::vector<double> a(50), b(50);
    for (int i = 0; i < 50; ++i) {
        a[i] = i;
        b[i] = i;
    }
    const auto stat = [](auto x, auto y) { return abs_pearson(x, y); };
    const auto r = permutation_test(stat, a, b, 999, 7);
    EXPECT_EQ(r.exceed, 0u);
    EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 1000.0);
    EXPECT_LT(r.max_permuted, 1.0);
}

TEST(Permutation, DeterministicAndWorkerIndependent) {
    std::mt19937_64 rng(6);
    const auto a = uniform(40, rng), b = uniform(40, rng);
    const auto stat = [](auto x, auto y) { return abs_pearson(x, y); };
    const auto r1 = permutation_test(stat, a, b, 500, 42);
    const auto r2 = permutation_test(stat, a, b, 500, 42);
    const auto r3 = permutation_test(stat, a, b, 500, 42, 3);
    EXPECT_EQ(r1.p_value, r2.p_value);
    EXPECT_EQ(r1.p_value, r3.p_value);
    EXPECT_EQ(r1.max_permuted, r3.max_permuted);
}

TEST(Permutation, DegenerateGivesOne) {
    const std::vector<double> a{1, 2, 3, 4}, c{5, 5, 5, 5};
    const auto r = permutation_test([](auto x, auto y) { return spearman_abs(x, y); }, a, c, 100, 1);
    EXPECT_EQ(r.p_value, 1.0);
    EXPECT_THROW(permutation_test([](auto x, auto y) { return spearman_abs(x, y); }, a, a, 0, 1), Error);
}

TEST(Permutation, NullCalibration) {
    std::mt19937_64 rng(8);
    int hits = 0;
    const int R = 200;
    for (int r = 0; r < R; ++r) {
        const auto a = uniform(40, rng), b = uniform(40, rng);
        const CovariateEntry e{"c", CovariateKind::continuous, 0, "g", CovariateRole::x};
        const auto s = score_covariate(e, a, b, {999, static_cast<std::uint64_t>(r + 1), 1});
        hits += s.p_value <= 0.05;
        EXPECT_GT(s.p_value, 0.0);
        EXPECT_LE(s.p_value, 1.0);
    }
    const double frac = static_cast<double>(hits) / R;
    EXPECT_GE(frac, 0.02);
    EXPECT_LE(frac, 0.09);
}

TEST(GroupReport, SingletonsEqualMembers) {
    std::vector<ImportanceScore> s{{"a", "ga", MeasureKind::spearman, 0.3, false, 0.01, 0.1},
                                   {"b", "gb", MeasureKind::correlation_ratio, 0.6, false, 0.2, 0.5}};
    const auto g = group_report(s, {{"a", "ga"}, {"b", "gb"}});
    ASSERT_EQ(g.size(), 2u);
    EXPECT_EQ(g[0].max_rho, 0.3);
    EXPECT_EQ(g[0].mean_rho, 0.3);
    EXPECT_TRUE(g[0].all_significant);
    EXPECT_EQ(g[1].max_rho, 0.6);
    EXPECT_FALSE(g[1].all_significant);
    EXPECT_THROW(group_report(s, {{"a", "ga"}}), Error);
}

TEST(GroupReport, PartitionAndScanOracle) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<ImportanceScore> s;
    std::map<std::string, std::string> groups;
    for (int i = 0; i < 40; ++i) {
        const auto name = "c" + std::to_string(i);
        const auto g = "g" + std::to_string(rng() % 6);
        s.push_back({name, g, MeasureKind::spearman, u(rng), false, u(rng), 0.0});
        groups[name] = g;
    }
    const auto rep = group_report(s, groups);
    std::size_t total = 0;
    for (const auto& g : rep) {
        total += g.members;
        double mx = -1;
        for (const auto& sc : s)
            if (groups[sc.covariate] == g.group)
                mx = std::max(mx, sc.rho);
        EXPECT_EQ(g.max_rho, mx);
    }
    EXPECT_EQ(total, s.size());
}

TEST(ScoreCovariate, StrongAssociationBeatsAllPermutations) {
    std::mt19937_64 rng(10);
    const auto c = uniform(200, rng);
    std::vector<double> y;
    for (double x : c)
        y.push_back(2.0 * x + 1.0);
    const CovariateEntry e{"c", CovariateKind::continuous, 0, "g", CovariateRole::x};
    const auto s = score_covariate(e, y, c, {2000, 3, 1});
    EXPECT_DOUBLE_EQ(s.rho, 1.0);
    EXPECT_GT(s.rho, s.max_permuted);
}
