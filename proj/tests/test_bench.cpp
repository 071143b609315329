#include "oracles.hpp"
#include "test_support.hpp"

#include <structdecomp/bench.hpp>

#include <gtest/gtest.h>

#include <vector>

using namespace structdecomp;

namespace {

using Idx = std::vector<std::size_t>;

/// Sorted indices in [0, 1000) with consecutive gaps > `gap`.
Idx separated(SplitMix64& rng, std::size_t count, std::size_t gap) {
    Idx out;
    std::size_t pos = rng.uniform_index(0, 20);
    for (std::size_t k = 0; k < count; ++k) {
        out.push_back(pos);
        pos += gap + 1 + rng.uniform_index(0, 60);
    }
    return out;
}

}  // namespace

TEST(ScoreChangepoints, Examples) {
    const auto one = score_changepoints(Idx{50}, Idx{51}, 3);
    EXPECT_EQ(one.precision, 1.0);
    EXPECT_EQ(one.recall, 1.0);
    EXPECT_EQ(one.f1, 1.0);

    const auto empty = score_changepoints(Idx{}, Idx{}, 3);
    EXPECT_EQ(empty.f1, 1.0);

    const auto three = score_changepoints(Idx{10, 50, 90}, Idx{50}, 3);
    const double p = 1.0 / 3.0, r = 1.0;
    EXPECT_DOUBLE_EQ(three.precision, p);
    EXPECT_DOUBLE_EQ(three.recall, r);
    EXPECT_DOUBLE_EQ(three.f1, 2 * p * r / (p + r));
    EXPECT_DOUBLE_EQ(three.f1, 0.5);

    const auto missed = score_changepoints(Idx{}, Idx{40}, 3);
    EXPECT_EQ(missed.precision, 0.0);
    EXPECT_EQ(missed.recall, 0.0);
    EXPECT_EQ(missed.f1, 0.0);

    EXPECT_EQ(score_changepoints(Idx{45}, Idx{50}, 3).f1, 0.0);
    EXPECT_EQ(score_changepoints(Idx{45}, Idx{50}, 5).f1, 1.0);
}

TEST(ScoreChangepoints, MatchingIsOneToOne) {
    const auto s = score_changepoints(Idx{49, 51}, Idx{50}, 3);
    EXPECT_DOUBLE_EQ(s.precision, 0.5);
    EXPECT_DOUBLE_EQ(s.recall, 1.0);
}

TEST(ScoreChangepoints, SwappingExchangesPrecisionAndRecall) {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t tol = rng.uniform_index(0, 6);
        const Idx truth = separated(rng, rng.uniform_index(0, 6), 2 * tol);
        Idx pred;
        for (std::size_t t : truth) {
            if (rng.uniform() < 0.7) pred.push_back(t + rng.uniform_index(0, tol));
        }
        for (std::size_t extra = rng.uniform_index(0, 2); extra > 0; --extra) pred.push_back(2000 + 100 * extra);
        const auto a = score_changepoints(pred, truth, tol);
        const auto b = score_changepoints(truth, pred, tol);
        ASSERT_DOUBLE_EQ(a.precision, b.recall);
        ASSERT_DOUBLE_EQ(a.recall, b.precision);
        ASSERT_DOUBLE_EQ(a.f1, b.f1);
        ASSERT_GE(a.f1, 0.0);
        ASSERT_LE(a.f1, 1.0);
        const bool perfect = pred.size() == truth.size() && a.precision == 1.0;
        ASSERT_EQ(a.f1 == 1.0, perfect);
    }
}

TEST(ScoreAnomalies, ExactMatches) {
    const auto s = score_anomalies(Idx{3, 7, 9}, Idx{7, 9, 12, 15});
    EXPECT_DOUBLE_EQ(s.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.recall, 0.5);
    EXPECT_DOUBLE_EQ(s.f1, 2 * (2.0 / 3.0) * 0.5 / (2.0 / 3.0 + 0.5));
}

TEST(CompareMethods, NoiseFreeSingleConfig) {
    SyntheticSpec spec;
    spec.n = 120;
    spec.base_level = 4.0;
    const auto truth = GroundTruth::from(generate_synthetic(spec));
    const std::vector<NamedConfig> configs{{"default", {}}};
    const auto rows = compare_methods(truth, configs);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_FALSE(rows[0].failed);
    EXPECT_LT(rows[0].trend_rmse, 1e-6);
    EXPECT_EQ(rows[0].changepoint_f1, 1.0);
    EXPECT_GE(rows[0].runtime_ms, 0.0);
}

TEST(CompareMethods, NoiseFreeRampWithoutSegmentation) {
    SyntheticSpec spec;
    spec.n = 120;
    spec.base_level = 4.0;
    spec.base_slope = 0.1;
    const auto truth = GroundTruth::from(generate_synthetic(spec));
    PipelineConfig cfg;
    cfg.changepoint_method = ChangepointMethod::none;
    const std::vector<NamedConfig> configs{{"none", cfg}};
    const auto row = compare_methods(truth, configs)[0];
    EXPECT_LT(row.trend_rmse, 1e-6);
    EXPECT_EQ(row.changepoint_f1, 1.0);
}

TEST(CompareMethods, SegmentationWinsOnOneBreak) {
    SyntheticSpec spec;
    spec.n = 300;
    spec.base_level = 10.0;
    spec.trend_breaks = {{149, 0.0, 8.0}};
    spec.noise_sd = 1.0;
    spec.seed = 17;
    const auto truth = GroundTruth::from(generate_synthetic(spec));
    PipelineConfig none;
    none.changepoint_method = ChangepointMethod::none;
    const std::vector<NamedConfig> configs{{"pelt", {}}, {"none", none}};
    const auto rows = compare_methods(truth, configs);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].config_id, "pelt");
    EXPECT_EQ(rows[1].config_id, "none");
    EXPECT_LT(rows[0].trend_rmse, rows[1].trend_rmse);
    EXPECT_EQ(rows[0].changepoint_f1, 1.0);
}

TEST(CompareMethods, FailingConfigIsIsolated) {
    SyntheticSpec spec;
    spec.n = 100;
    spec.base_level = -5.0;
    spec.noise_sd = 1.0;
    const auto truth = GroundTruth::from(generate_synthetic(spec));
    PipelineConfig mult;
    mult.model = DecompositionModel::multiplicative;
    const std::vector<NamedConfig> configs{{"a", {}}, {"mult", mult}, {"b", {}}};
    const auto rows = compare_methods(truth, configs);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_FALSE(rows[0].failed);
    EXPECT_TRUE(rows[1].failed);
    EXPECT_NE(rows[1].error.find("NonPositiveValueForMultiplicative"), std::string::npos);
    EXPECT_FALSE(rows[2].failed);
    EXPECT_EQ(rows[0].trend_rmse, rows[2].trend_rmse);
}

TEST(CompareMethods, RmseMatchesDirectComputation) {
    SyntheticSpec spec;
    spec.n = 240;
    spec.base_level = 2.0;
    spec.period = 12;
    spec.seasonal_amplitude = 2.0;
    spec.noise_sd = 0.5;
    spec.seed = 8;
    const auto syn = generate_synthetic(spec);
    const auto truth = GroundTruth::from(syn);
    const std::vector<NamedConfig> configs{{"x", {}}};
    const auto row = compare_methods(truth, configs)[0];
    const auto r = decompose_structural(syn.series, {});
    EXPECT_NEAR(row.trend_rmse, oracle::rmse(r.trend, syn.trend), 1e-12);
    EXPECT_NEAR(row.seasonal_rmse, oracle::rmse(r.seasonal, syn.seasonal), 1e-12);
}
