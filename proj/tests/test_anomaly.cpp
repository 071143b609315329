#include "oracles.hpp"
#include "test_support.hpp"

#include <structdecomp/anomaly.hpp>
#include <structdecomp/synthetic.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace structdecomp;
using testsupport::concat;
using testsupport::repeat;

namespace {

std::vector<std::size_t> flagged(const AnomalyReport& r) { return r.flagged_indices(); }

/// Direct z-scores: two-pass mean and population sd.
std::vector<double> zscores(const std::vector<double>& y) {
    double m = 0.0;
    for (double v : y) m += v;
    m /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / static_cast<double>(y.size()));
    std::vector<double> out;
    for (double v : y) out.push_back(std::abs(v - m) / sd);
    return out;
}

/// Robust scale from sorted medians, with the mean-abs-dev fallback.
double scale_of(const std::vector<double>& y) {
    const double med = oracle::median_of(y);
    std::vector<double> dev;
    for (double v : y) dev.push_back(std::abs(v - med));
    const double mad = oracle::median_of(dev);
    if (mad > 0.0) return 1.4826 * mad;
    double s = 0.0;
    for (double d : dev) s += d;
    return 1.2533 * s / static_cast<double>(y.size());
}

/// Rolling-median residual scores computed window by window.
std::vector<double> rolling_scores(const std::vector<double>& y, std::size_t w) {
    const std::size_t n = y.size();
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t h = w / 2;
        h = std::min(h, i);
        h = std::min(h, n - 1 - i);
        std::vector<double> win(y.begin() + static_cast<long>(i - h), y.begin() + static_cast<long>(i + h + 1));
        r[i] = y[i] - oracle::median_of(win);
    }
    const double s = scale_of(r);
    std::vector<double> out;
    for (double v : r) out.push_back(s > 0.0 ? std::abs(v) / s : 0.0);
    return out;
}

std::vector<double> ramp(std::size_t n) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<double>(i);
    return y;
}

}  // namespace

TEST(Zscore, ConstantSegmentHasNoFlags) {
    const auto r = detect_zscore(repeat(4.0, 4));
    EXPECT_EQ(r.flagged_count(), 0u);
    for (double s : r.scores) EXPECT_EQ(s, 0.0);
}

TEST(Zscore, SingleLargeValue) {
    const auto y = concat({repeat(0.0, 99), {100.0}});
    const auto expected = zscores(y);
    ASSERT_NEAR(expected[99], 9.9499, 1e-4);
    const auto r = detect_zscore(y, 3.0);
    EXPECT_EQ(flagged(r), (std::vector<std::size_t>{99}));
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(r.scores[i], expected[i], 1e-12);
}

TEST(Zscore, SmallDeviationNotFlagged) {
    const std::vector<double> y{0, 0, 0, 1};
    ASSERT_NEAR(zscores(y)[3], std::sqrt(3.0), 1e-12);
    const auto r = detect_zscore(y, 3.0);
    EXPECT_EQ(r.flagged_count(), 0u);
    EXPECT_NEAR(r.scores[3], 1.732, 1e-3);
}

TEST(Mad, ConstantSegmentHasNoFlags) { EXPECT_EQ(detect_mad(repeat(2.0, 10)).flagged_count(), 0u); }

TEST(Mad, AlternatingWithOutlier) {
    const std::vector<double> y{1, 2, 1, 2, 1, 2, 1, 2, 1, 10};
    const double expected = 8.5 / scale_of(y);
    ASSERT_NEAR(expected, 11.47, 0.01);
    const auto r = detect_mad(y);
    EXPECT_EQ(flagged(r), (std::vector<std::size_t>{9}));
    EXPECT_NEAR(r.scores[9], expected, 1e-12);
}

TEST(Mad, ZeroMadFallsBackToMeanAbsoluteDeviation) {
    const std::vector<double> y{1, 1, 1, 1, 1, 1, 1, 1, 1, 10};
    const double expected = 9.0 / scale_of(y);
    ASSERT_NEAR(scale_of(y), 1.1280, 1e-4);
    ASSERT_NEAR(expected, 7.98, 0.01);
    const auto r = detect_mad(y);
    EXPECT_EQ(flagged(r), (std::vector<std::size_t>{9}));
    EXPECT_NEAR(r.scores[9], expected, 1e-12);
}

TEST(Mad, ErrorPaths) {
    try {
        detect_mad(std::vector<double>{1.0, 2.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SegmentTooShort);
    }
    EXPECT_THROW(detect_zscore(std::vector<double>{1.0, 2.0}), Error);
}

TEST(RollingMedian, ConstantSegmentHasNoFlags) {
    for (std::size_t w : {3u, 5u, 11u}) EXPECT_EQ(detect_rolling_median(repeat(7.0, 30), w).flagged_count(), 0u);
}

TEST(RollingMedian, SpikeOnRamp) {
    auto y = ramp(100);
    y[50] = 500.0;
    const auto expected = rolling_scores(y, 11);
    std::vector<std::size_t> oracle_flags;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (expected[i] > 3.0) oracle_flags.push_back(i);
    ASSERT_EQ(oracle_flags, (std::vector<std::size_t>{50}));
    const auto r = detect_rolling_median(y, 11);
    EXPECT_EQ(flagged(r), oracle_flags);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(r.scores[i], expected[i], 1e-9);
}

TEST(RollingMedian, PureRampHasNoFlags) {
    const auto y = ramp(100);
    for (double s : rolling_scores(y, 11)) ASSERT_LE(s, 3.0);
    EXPECT_EQ(detect_rolling_median(y, 11).flagged_count(), 0u);
}

TEST(RollingMedian, MatchesDirectRecomputationOnNoise) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto y = testsupport::white_noise(seed, 80);
        y[seed * 3 + 5] += 9.0;
        const auto expected = rolling_scores(y, 7);
        const auto r = detect_rolling_median(y, 7);
        for (std::size_t i = 0; i < y.size(); ++i) {
            EXPECT_NEAR(r.scores[i], expected[i], 1e-9);
            EXPECT_EQ(r.flags[i], expected[i] > 3.0);
        }
    }
}

TEST(RollingMedian, ErrorPaths) {
    const auto y = ramp(20);
    try {
        detect_rolling_median(y, 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EvenWindow);
    }
    try {
        detect_rolling_median(ramp(9), 11);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SegmentTooShort);
    }
}

TEST(ApplyPolicy, Examples) {
    const std::vector<double> y{0.0, 100.0, 2.0};
    EXPECT_EQ(apply_policy(y, {false, false, false}, AnomalyPolicy::replace).values, y);

    const auto mid = apply_policy(y, {false, true, false}, AnomalyPolicy::replace);
    EXPECT_EQ(mid.values, (std::vector<double>{0.0, 1.0, 2.0}));
    EXPECT_EQ(mid.replacements, (std::map<std::size_t, double>{{1, 1.0}}));

    const std::vector<double> z{100.0, 1.0, 2.0};
    EXPECT_EQ(apply_policy(z, {true, false, false}, AnomalyPolicy::replace).values, (std::vector<double>{1.0, 1.0, 2.0}));

    const auto kept = apply_policy(y, {false, true, false}, AnomalyPolicy::keep);
    EXPECT_EQ(kept.values, y);
    EXPECT_TRUE(kept.replacements.empty());
}

TEST(ApplyPolicy, RunsAndTrailingEdge) {
    const std::vector<double> y{0.0, 50.0, 50.0, 3.0, 4.0, 90.0};
    const auto out = apply_policy(y, {false, true, true, false, false, true}, AnomalyPolicy::replace, 10);
    EXPECT_EQ(out.values, (std::vector<double>{0.0, 1.0, 2.0, 3.0, 4.0, 4.0}));
    EXPECT_EQ(out.replacements.count(11), 1u);
    EXPECT_EQ(out.replacements.count(15), 1u);
}

TEST(ApplyPolicy, AllFlaggedIsAnError) {
    try {
        apply_policy(std::vector<double>{1.0, 2.0}, {true, true}, AnomalyPolicy::replace);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AllPointsFlagged);
    }
}

TEST(ApplyPolicy, NeverTouchesUnflaggedPointsAndStaysFinite) {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(0, 40);
        std::vector<double> y(n);
        std::vector<bool> flags(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = 100.0 * rng.normal();
            flags[i] = rng.uniform() < 0.4;
        }
        flags[rng.uniform_index(0, n - 1)] = false;
        const auto out = apply_policy(y, flags, AnomalyPolicy::replace);
        for (std::size_t i = 0; i < n; ++i) {
            ASSERT_TRUE(std::isfinite(out.values[i]));
            if (!flags[i]) ASSERT_EQ(out.values[i], y[i]);
            else ASSERT_EQ(out.replacements.at(i), out.values[i]);
        }
    }
}

TEST(Scores, LocationScaleInvariant) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        auto y = testsupport::white_noise(seed, 60);
        y[seed % 60] += 7.0;
        const auto z = detect_zscore(y);
        const auto m = detect_mad(y);
        for (double c : {-40.0, 3.5, 1e4}) {
            std::vector<double> shifted(y), scaled(y);
            for (double& v : shifted) v += c;
            for (double& v : scaled) v *= std::abs(c);
            const auto zs = detect_zscore(shifted), ms = detect_mad(shifted);
            const auto zk = detect_zscore(scaled), mk = detect_mad(scaled);
            for (std::size_t i = 0; i < y.size(); ++i) {
                EXPECT_NEAR(zs.scores[i], z.scores[i], 1e-9);
                EXPECT_NEAR(ms.scores[i], m.scores[i], 1e-9);
                EXPECT_NEAR(zk.scores[i], z.scores[i], 1e-9);
                EXPECT_NEAR(mk.scores[i], m.scores[i], 1e-9);
            }
        }
    }
}

TEST(Scores, PerSegmentReportsConcatenate) {
    const auto y = concat({testsupport::white_noise(1, 40), testsupport::white_noise(2, 60, 3.0)});
    const auto first = detect_mad(std::span<const double>(y).subspan(0, 40));
    const auto second = detect_mad(std::span<const double>(y).subspan(40));
    const auto direct_first = detect_mad(std::vector<double>(y.begin(), y.begin() + 40));
    const auto direct_second = detect_mad(std::vector<double>(y.begin() + 40, y.end()));
    EXPECT_EQ(first.scores, direct_first.scores);
    EXPECT_EQ(second.scores, direct_second.scores);
}

TEST(Mad, RecoversPlantedSpikes) {
    double precision = 0.0, recall = 0.0, z_recall = 0.0;
    const int seeds = 50;
    for (int s = 0; s < seeds; ++s) {
        SplitMix64 rng(static_cast<std::uint64_t>(s) + 500);
        SyntheticSpec spec;
        spec.n = 500;
        spec.base_level = 0.0;
        spec.noise_sd = 1.0;
        spec.spike_indices = sample_distinct_indices(rng, 25, 0, 499);
        spec.spike_magnitude = 8.0;
        spec.seed = static_cast<std::uint64_t>(s);
        const auto syn = generate_synthetic(spec);
        const auto truth = syn.true_anomalies;
        auto score = [&](const AnomalyReport& r, double& p, double& rc) {
            std::size_t hit = 0;
            for (std::size_t i : truth) hit += r.flags[i] ? 1 : 0;
            const std::size_t k = r.flagged_count();
            p += k ? static_cast<double>(hit) / static_cast<double>(k) : 1.0;
            rc += static_cast<double>(hit) / static_cast<double>(truth.size());
        };
        double unused = 0.0;
        score(detect_mad(syn.series.values()), precision, recall);
        score(detect_zscore(syn.series.values()), unused, z_recall);
    }
    EXPECT_GE(precision / seeds, 0.9);
    EXPECT_GE(recall / seeds, 0.9);
    RecordProperty("zscore_recall", std::to_string(z_recall / seeds));
}

TEST(AnomalyCap, CeilOfFraction) {
    EXPECT_EQ(anomaly_cap(100, 0.2), 20u);
    EXPECT_EQ(anomaly_cap(101, 0.2), 21u);
    EXPECT_EQ(anomaly_cap(5, 0.2), 1u);
}
