#pragma once

#include "core.hpp"
#include "pipeline.hpp"
#include "synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

namespace structdecomp {

struct DetectionScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

namespace detail {

inline DetectionScore finish_score(std::size_t matches, std::size_t predicted, std::size_t truth) {
    DetectionScore s;
    if (predicted == 0 && truth == 0) return {1.0, 1.0, 1.0};
    s.precision = predicted == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(predicted);
    s.recall = truth == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(truth);
    s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

}  // namespace detail

/// Greedy one-to-one matching: predicted breaks in ascending order each take
/// the nearest still-unmatched true break within ±tolerance (lower one on ties).
inline DetectionScore score_changepoints(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                         std::size_t tolerance) {
    std::vector<std::size_t> pred(predicted.begin(), predicted.end());
    std::vector<std::size_t> tru(truth.begin(), truth.end());
    std::sort(pred.begin(), pred.end());
    std::sort(tru.begin(), tru.end());
    std::vector<bool> used(tru.size(), false);
    std::size_t matches = 0;
    for (std::size_t p : pred) {
        std::size_t best = tru.size();
        std::size_t best_dist = tolerance + 1;
        for (std::size_t k = 0; k < tru.size(); ++k) {
            if (used[k]) continue;
            const std::size_t dist = p > tru[k] ? p - tru[k] : tru[k] - p;
            if (dist < best_dist) {
                best_dist = dist;
                best = k;
            }
        }
        if (best < tru.size()) {
            used[best] = true;
            ++matches;
        }
    }
    return detail::finish_score(matches, pred.size(), tru.size());
}

inline DetectionScore score_changepoints(const ChangepointSet& predicted, std::span<const std::size_t> truth,
                                         std::size_t tolerance) {
    return score_changepoints(predicted.breaks(), truth, tolerance);
}

/// Exact index matching for anomaly flags.
inline DetectionScore score_anomalies(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
    std::vector<std::size_t> tru(truth.begin(), truth.end());
    std::sort(tru.begin(), tru.end());
    std::size_t matches = 0;
    for (std::size_t p : predicted)
        if (std::binary_search(tru.begin(), tru.end(), p)) ++matches;
    return detail::finish_score(matches, predicted.size(), tru.size());
}

inline double rmse(std::span<const double> a, std::span<const double> b) {
    if (a.empty()) return 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(ss / static_cast<double>(a.size()));
}

/// Observed series plus the components it was built from.
struct GroundTruth {
    TimeSeries series;
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<std::size_t> breaks;
    std::vector<std::size_t> anomalies;

    static GroundTruth from(const SyntheticSeries& s) {
        return {s.series, s.trend, s.seasonal, s.true_breaks, s.true_anomalies};
    }
};

struct NamedConfig {
    std::string id;
    PipelineConfig config;
};

struct MethodScore {
    std::string config_id;
    double trend_rmse = 0.0;
    double seasonal_rmse = 0.0;
    double changepoint_precision = 0.0;
    double changepoint_recall = 0.0;
    double changepoint_f1 = 0.0;
    double anomaly_precision = 0.0;
    double anomaly_recall = 0.0;
    double runtime_ms = 0.0;
    bool failed = false;
    std::string error;
};

inline constexpr std::size_t kDefaultBreakTolerance = 5;

/// Runs every configuration on the same series and scores it against the truth.
/// A failing configuration yields a row marked failed; the batch continues.
///
/// For multiplicative runs the seasonal error is measured on T·(S − 1), the
/// additive-scale seasonal swing.
inline std::vector<MethodScore> compare_methods(const GroundTruth& truth, std::span<const NamedConfig> configs,
                                                std::size_t tolerance = kDefaultBreakTolerance) {
    if (configs.empty()) throw Error(ErrorCode::InvalidConfig, "compare_methods needs at least one configuration");
    const std::size_t n = truth.series.size();
    if (truth.trend.size() != n || truth.seasonal.size() != n) {
        throw Error(ErrorCode::InvalidConfig, "ground truth components are not aligned with the series");
    }
    std::vector<MethodScore> rows;
    rows.reserve(configs.size());
    for (const auto& named : configs) {
        MethodScore row;
        row.config_id = named.id;
        const auto start = std::chrono::steady_clock::now();
        try {
            const auto result = decompose_structural(truth.series, named.config);
            row.runtime_ms = detail::elapsed_ms(start);
            row.trend_rmse = rmse(result.trend, truth.trend);
            if (result.model == DecompositionModel::additive) {
                row.seasonal_rmse = rmse(result.seasonal, truth.seasonal);
            } else {
                std::vector<double> swing(n);
                for (std::size_t i = 0; i < n; ++i) swing[i] = result.trend[i] * (result.seasonal[i] - 1.0);
                row.seasonal_rmse = rmse(swing, truth.seasonal);
            }
            const auto cp = score_changepoints(result.changepoints, truth.breaks, tolerance);
            row.changepoint_precision = cp.precision;
            row.changepoint_recall = cp.recall;
            row.changepoint_f1 = cp.f1;
            const auto flagged = result.anomalies.flagged_indices();
            const auto an = score_anomalies(flagged, truth.anomalies);
            row.anomaly_precision = an.precision;
            row.anomaly_recall = an.recall;
        } catch (const std::exception& err) {
            row.runtime_ms = detail::elapsed_ms(start);
            row.failed = true;
            row.error = err.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace structdecomp
