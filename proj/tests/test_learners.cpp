#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "osassl/learners.hpp"
#include "support.hpp"

using namespace osassl;
using namespace osassl::learners;
using testing_support::random_panel;
using testing_support::rel_close;
using testing_support::simple_schema;
using json = nlohmann::json;

namespace {

BaseLearner make(const std::string& kind, json params = json::object()) {
    return BaseLearner(LearnerSpec{kind, kind, std::move(params), std::nullopt, {}});
}

Observation query(std::vector<double> x, std::vector<double> z) {
    return Observation(CityId{1}, TimeIndex{1}, std::move(x), std::move(z), 0.0, false);
}

Observation declared_query(std::vector<double> x, std::vector<double> z) {
    return Observation(CityId{1}, TimeIndex{1}, std::move(x), std::move(z), 1.0, true);
}

/// Panel with a single slice built from (x, z, y, declared) rows.
Panel rows_panel(const CovariateSchema& schema, const std::vector<std::tuple<std::vector<double>, std::vector<double>,
                                                                              double, bool>>& rows,
                 std::optional<double> bound = std::nullopt) {
    std::vector<Observation> obs;
    std::int64_t id = 1;
    for (const auto& [x, z, y, d] : rows)
        obs.emplace_back(CityId{id++}, TimeIndex{1}, x, z, y, d);
    std::vector<PanelSlice> slices;
    slices.emplace_back(TimeIndex{1}, std::move(obs));
    return Panel::from_slices(schema, std::move(slices), bound);
}

double ks_brute(std::vector<double> a, std::vector<double> b) {
    std::vector<double> pts = a;
    pts.insert(pts.end(), b.begin(), b.end());
    double d = 0.0;
    for (double x : pts) {
        double fa = 0, fb = 0;
        for (double v : a)
            fa += v <= x;
        for (double v : b)
            fb += v <= x;
        d = std::max(d, std::abs(fa / a.size() - fb / b.size()));
    }
    return d;
}

}  // namespace

TEST(MeanLearner, ConstantModel) {
    const auto schema = simple_schema(1, 0);
    const auto p = rows_panel(schema, {{{0.1}, {}, 2.0, true}, {{0.9}, {}, 4.0, true}, {{0.5}, {}, 0.0, false}});
    const auto pred = make("mean").fit(p);
    EXPECT_DOUBLE_EQ(pred->predict(declared_query({0.3}, {})), 3.0);
    EXPECT_DOUBLE_EQ(pred->predict(declared_query({123.0}, {})), 3.0);
    EXPECT_EQ(pred->predict(query({0.3}, {})), 0.0);
}

TEST(Learners, MaskAndClampUnderFuzz) {
    const auto p = random_panel(30, 3, 5, 2, 4);
    std::vector<BaseLearner> zoo{make("mean"), make("ridge", {{"lambda", 0.01}}),
                                 make("boosted_linear", {{"rounds", 5}, {"shrinkage", 0.5}}),
                                 make("knn_ks", {{"k", 3}, {"channel_width", 2}})};
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (const auto& l : zoo) {
        const auto pred = l.fit(p);
        for (int i = 0; i < 2000; ++i) {
            std::vector<double> x{u(rng), u(rng)}, z{u(rng), u(rng), u(rng), u(rng)};
            const double v = pred->predict(declared_query(x, z));
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, p.cost_bound());
            EXPECT_EQ(pred->predict(query(x, z)), 0.0);
        }
    }
}

TEST(Learners, NoDeclaredFallsBackToZero) {
    const auto p = random_panel(10, 2, 3, 2, 2, 0.0);
    const auto pred = make("ridge").fit(p);
    EXPECT_TRUE(pred->degenerate());
    EXPECT_EQ(pred->predict(declared_query({0.5, 0.5}, {0.5, 0.5})), 0.0);
}

TEST(Ridge, HugePenaltyGivesTrainingMean) {
    const auto p = random_panel(40, 2, 8);
    double s = 0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < p.num_slices(); ++t)
        for (const auto& o : p.slice(t).observations())
            if (o.declared()) {
                s += o.y();
                ++n;
            }
    const auto pred = make("ridge", {{"lambda", 1e8}}).fit(p);
    EXPECT_NEAR(pred->predict(declared_query({0.9, 0.1}, {0.3, 0.3})), s / n, 1e-5);
}

TEST(Ridge, ZeroPenaltyRecoversLinearTarget) {
    const auto schema = simple_schema(2, 0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::tuple<std::vector<double>, std::vector<double>, double, bool>> rows;
    for (int i = 0; i < 30; ++i) {
        const double a = u(rng), b = u(rng);
        rows.push_back({{a, b}, {}, 1.0 + 2.0 * a - 0.5 * b, true});
    }
    const auto pred = make("ridge", {{"lambda", 0.0}}).fit(rows_panel(schema, rows, 10.0));
    EXPECT_NEAR(pred->predict(declared_query({0.3, 0.7}, {})), 1.0 + 0.6 - 0.35, 1e-10);
}

TEST(Ridge, CategoricalOneHot) {
    const CovariateSchema schema({{"zone", CovariateKind::categorical, 3, "zone", CovariateRole::x}});
    std::vector<std::tuple<std::vector<double>, std::vector<double>, double, bool>> rows;
    const double level_mean[3] = {1.0, 5.0, 2.0};
    for (int i = 0; i < 30; ++i)
        rows.push_back({{double(i % 3)}, {}, level_mean[i % 3], true});
    const auto pred = make("ridge", {{"lambda", 0.0}}).fit(rows_panel(schema, rows, 10.0));
    for (int l = 0; l < 3; ++l)
        EXPECT_NEAR(pred->predict(declared_query({double(l)}, {})), level_mean[l], 1e-10);
}

TEST(Boosted, RealizableTargetInOneRound) {
    const auto schema = simple_schema(3, 0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::tuple<std::vector<double>, std::vector<double>, double, bool>> rows;
    for (int i = 0; i < 25; ++i) {
        const double a = u(rng), b = u(rng), c = u(rng);
        rows.push_back({{a, b, c}, {}, 2.0 + 3.0 * b, true});
    }
    const auto pred = boosted_linear_fit(1, 1.0, rows_panel(schema, rows, 100.0));
    const auto& bp = dynamic_cast<const BoostedLinearPredictor&>(*pred);
    ASSERT_EQ(bp.boosters().size(), 1u);
    EXPECT_EQ(bp.boosters()[0].column, 1u);
    EXPECT_LE(bp.training_risk().back(), 1e-8 * bp.training_risk().front());
    for (const auto& [x, z, y, d] : rows)
        EXPECT_TRUE(rel_close(pred->predict(declared_query(x, z)), y, 1e-8));
}

TEST(Boosted, ConstantTargetGivesConstant) {
    const auto schema = simple_schema(2, 0);
    std::vector<std::tuple<std::vector<double>, std::vector<double>, double, bool>> rows;
    for (int i = 0; i < 10; ++i)
        rows.push_back({{0.1 * i, 0.3 * (i % 4)}, {}, 4.0, true});
    const auto pred = boosted_linear_fit(1, 1.0, rows_panel(schema, rows, 10.0));
    for (double a : {0.0, 0.5, 3.0})
        EXPECT_NEAR(pred->predict(declared_query({a, a}, {})), 4.0, 1e-12);
}

TEST(Boosted, AllConstantDesignIsBaseOnly) {
    const auto schema = simple_schema(2, 0);
    std::vector<std::tuple<std::vector<double>, std::vector<double>, double, bool>> rows;
    for (int i = 0; i < 10; ++i)
        rows.push_back({{1.0, 2.0}, {}, double(i), true});
    const auto pred = boosted_linear_fit(3, 0.5, rows_panel(schema, rows, 20.0));
    const auto& bp = dynamic_cast<const BoostedLinearPredictor&>(*pred);
    EXPECT_TRUE(bp.boosters().empty());
    EXPECT_DOUBLE_EQ(pred->predict(declared_query({1.0, 2.0}, {})), 4.5);
}

TEST(Boosted, TrainingRiskNonincreasing) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto p = random_panel(40, 3, seed, 4, 2);
        const auto pred = boosted_linear_fit(5, 0.3, p);
        const auto& tr = dynamic_cast<const BoostedLinearPredictor&>(*pred).training_risk();
        ASSERT_EQ(tr.size(), 6u);
        for (std::size_t m = 1; m < tr.size(); ++m)
            EXPECT_LE(tr[m], tr[m - 1] * (1 + 1e-14));
    }
}

TEST(Boosted, TieBreaksToLowestIndex) {
    const auto schema = simple_schema(2, 0);
    std::vector<std::tuple<std::vector<double>, std::vector<double>, double, bool>> rows;
    for (int i = 0; i < 8; ++i)
        rows.push_back({{double(i), double(i)}, {}, 1.0 + i, true});
    const auto pred = boosted_linear_fit(1, 1.0, rows_panel(schema, rows, 20.0));
    EXPECT_EQ(dynamic_cast<const BoostedLinearPredictor&>(*pred).boosters()[0].column, 0u);
}

TEST(Boosted, HyperparametersValidated) {
    EXPECT_THROW(make("boosted_linear", {{"rounds", 0}}), Error);
    EXPECT_THROW(make("boosted_linear", {{"shrinkage", 0.0}}), Error);
    EXPECT_THROW(make("boosted_linear", {{"shrinkage", 1.5}}), Error);
    EXPECT_THROW(make("ridge", {{"lambda", -1}}), Error);
    EXPECT_THROW(make("knn_ks", {{"k", 0}}), Error);
    EXPECT_THROW(make("nope"), Error);
}

TEST(Screen, FullSchemaIdentical) {
    const auto p = random_panel(30, 2, 4, 3, 2);
    const auto base = make("ridge", {{"lambda", 0.5}});
    const auto screened = screen(base, {"x1", "x2", "x3", "z1", "z2"});
    const auto a = base.fit(p), b = screened.fit(p);
    for (std::size_t t = 0; t < p.num_slices(); ++t)
        EXPECT_EQ(a->predict(p.slice(t)), b->predict(p.slice(t)));
}

TEST(Screen, IrrelevantCovariateDropped) {
    // Target depends on x1 only; x2 is constant in training, so dropping it
    // leaves the fit unchanged on data generated independent of it.
    const auto schema = simple_schema(2, 0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::tuple<std::vector<double>, std::vector<double>, double, bool>> rows;
    for (int i = 0; i < 40; ++i) {
        const double a = u(rng);
        rows.push_back({{a, 0.5}, {}, 1.0 + 2.0 * a, true});
    }
    const auto p = rows_panel(schema, rows, 10.0);
    const auto base = make("boosted_linear", {{"rounds", 4}, {"shrinkage", 0.5}});
    const auto a = base.fit(p), b = screen(base, {"x1"}).fit(p);
    for (int i = 0; i < 20; ++i) {
        const auto q = declared_query({u(rng), 0.5}, {});
        EXPECT_NEAR(a->predict(q), b->predict(q), 1e-12);
    }
}

TEST(Screen, SingleCovariateBoostingIsSimpleRegression) {
    const auto p = random_panel(50, 2, 6, 3, 0);
    const auto pred = screen(make("boosted_linear", {{"rounds", 1}, {"shrinkage", 1.0}}), {"x2"}).fit(p);
    // Closed-form simple regression of y on x2 over declared observations.
    double sx = 0, sy = 0, n = 0;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t t = 0; t < p.num_slices(); ++t)
        for (const auto& o : p.slice(t).observations())
            if (o.declared()) {
                pts.emplace_back(o.x()[1], o.y());
                sx += o.x()[1];
                sy += o.y();
                n += 1;
            }
    const double mx = sx / n, my = sy / n;
    double sxy = 0, sxx = 0;
    for (auto [x, y] : pts) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    const double b = sxy / sxx, a = my - b * mx;
    for (double x : {0.1, 0.4, 0.8})
        EXPECT_TRUE(rel_close(pred->predict(declared_query({0.0, x, 0.0}, {})), a + b * x, 1e-10));
}

TEST(Screen, Errors) {
    EXPECT_THROW(screen(make("mean"), {}), Error);
    const auto p = random_panel(5, 1, 1);
    EXPECT_THROW(screen(make("ridge"), {"missing"}).fit(p), Error);
}

TEST(KsDistance, MatchesBruteForce) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> small(0, 4);
    for (int rep = 0; rep < 500; ++rep) {
        std::vector<double> a(1 + rng() % 6), b(1 + rng() % 6);
        for (auto& v : a)
            v = small(rng) * 0.25;  // frequent ties
        for (auto& v : b)
            v = small(rng) * 0.25;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_DOUBLE_EQ(ks_distance(a, b), ks_brute(a, b));
    }
}

TEST(KnnKs, IdenticalPointWithOneNeighbor) {
    const auto p = random_panel(12, 1, 8, 1, 4, 1.0);
    const auto pred = knn_ks_fit(1, {1.0, 1.0}, 2, p);
    for (const auto& o : p.slice(0).observations())
        EXPECT_EQ(pred->predict(o), o.y());
}

TEST(KnnKs, ZeroWeightChannelIgnored) {
    const auto p = random_panel(15, 1, 9, 1, 4, 1.0);
    const auto pred = knn_ks_fit(3, {1.0, 0.0}, 2, p);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 50; ++i) {
        const auto q1 = declared_query({0.5}, {u(rng), u(rng), u(rng), u(rng)});
        auto z = q1.z();
        z[2] = u(rng);
        z[3] = u(rng);
        const auto q2 = declared_query({0.5}, z);
        EXPECT_EQ(pred->predict(q1), pred->predict(q2));
    }
}

TEST(KnnKs, MatchesExhaustiveSearch) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
        const auto p = random_panel(10, 1, 100 + rep, 1, 6, 1.0);
        const std::vector<double> w{0.2, 0.5, 0.3};
        const auto pred = knn_ks_fit(3, w, 2, p);
        const auto& knn = dynamic_cast<const KnnKsPredictor&>(*pred);
        const auto q = declared_query({0.5}, {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)});
        std::vector<std::pair<double, std::size_t>> d;
        const auto& obs = p.slice(0).observations();
        for (std::size_t r = 0; r < obs.size(); ++r) {
            double dist = 0;
            for (int c = 0; c < 3; ++c)
                dist += w[c] * ks_brute({q.z()[2 * c], q.z()[2 * c + 1]}, {obs[r].z()[2 * c], obs[r].z()[2 * c + 1]});
            d.emplace_back(dist, r);
        }
        std::sort(d.begin(), d.end());
        const auto nn = knn.neighbors(q);
        ASSERT_EQ(nn.size(), 3u);
        double mean = 0;
        for (int i = 0; i < 3; ++i) {
            EXPECT_EQ(nn[i], d[i].second);
            mean += obs[d[i].second].y() / 3.0;
        }
        EXPECT_TRUE(rel_close(pred->predict(q), mean, 1e-14));
    }
}

TEST(KnnKs, FewerThanKUsesAll) {
    const auto p = random_panel(4, 1, 2, 1, 2, 1.0);
    const auto pred = knn_ks_fit(10, {1.0}, 2, p);
    double mean = 0;
    for (const auto& o : p.slice(0).observations())
        mean += o.y() / 4.0;
    EXPECT_TRUE(rel_close(pred->predict(declared_query({0.5}, {0.2, 0.7})), mean, 1e-14));
}

TEST(Combiners, AverageAndMedian) {
    const double B = 100.0;
    std::vector<PredictorPtr> m{std::make_shared<ConstantPredictor>(1.0, B), std::make_shared<ConstantPredictor>(2.0, B),
                                std::make_shared<ConstantPredictor>(9.0, B)};
    const auto q = declared_query({}, {});
    EXPECT_DOUBLE_EQ(combine_average(m)->predict(q), 4.0);
    EXPECT_DOUBLE_EQ(combine_median(m)->predict(q), 2.0);
    m.push_back(std::make_shared<ConstantPredictor>(5.0, B));
    EXPECT_DOUBLE_EQ(combine_median(m)->predict(q), 2.0);  // lower median
    EXPECT_EQ(combine_average(m)->predict(query({}, {})), 0.0);
    EXPECT_THROW(combine_average({}), Error);
}

TEST(Combiners, IdenticalMembers) {
    const auto p = random_panel(20, 2, 12);
    const auto r = make("ridge").fit(p);
    const auto a = combine_average({r, r, r}), md = combine_median({r, r});
    for (const auto& o : p.slice(1).observations()) {
        EXPECT_DOUBLE_EQ(a->predict(o), r->predict(o));
        EXPECT_EQ(md->predict(o), r->predict(o));
    }
}

TEST(Combiners, RandomMembersMatchPointwiseOracleAndPermutation) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0, 10);
    std::vector<PredictorPtr> m;
    std::vector<double> v;
    for (int i = 0; i < 10; ++i) {
        v.push_back(u(rng));
        m.push_back(std::make_shared<ConstantPredictor>(v.back(), 20.0));
    }
    const auto q = declared_query({}, {});
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const double avg = std::accumulate(v.begin(), v.end(), 0.0) / 10.0;
    EXPECT_TRUE(rel_close(combine_average(m)->predict(q), avg, 1e-14));
    EXPECT_EQ(combine_median(m)->predict(q), sorted[4]);
    for (int rep = 0; rep < 10; ++rep) {
        std::shuffle(m.begin(), m.end(), rng);
        EXPECT_TRUE(rel_close(combine_average(m)->predict(q), avg, 1e-14));
        EXPECT_EQ(combine_median(m)->predict(q), sorted[4]);
    }
}

TEST(Learners, DeterministicFits) {
    const auto p = random_panel(30, 3, 14, 2, 4);
    for (const auto& l : {make("ridge"), make("boosted_linear"), make("knn_ks", {{"channel_width", 2}})}) {
        const auto a = l.fit(p), b = l.fit(p);
        for (std::size_t t = 0; t < p.num_slices(); ++t)
            EXPECT_EQ(a->predict(p.slice(t)), b->predict(p.slice(t)));
    }
}

TEST(Learners, SpecJsonRoundTrip) {
    const auto j = json::parse(R"({"name":"avg","kind":"average","members":[{"name":"m","kind":"mean"},
        {"name":"r","kind":"ridge","hyperparameters":{"lambda":2},"screen":["x1"]}]})");
    const auto s = learner_spec_from_json(j);
    EXPECT_EQ(learner_spec_to_json(s), learner_spec_to_json(learner_spec_from_json(learner_spec_to_json(s))));
    const BaseLearner l(s);
    const auto p = random_panel(10, 2, 1);
    EXPECT_NO_THROW(l.fit(p));
}
