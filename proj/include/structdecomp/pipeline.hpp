#pragma once

#include "anomaly.hpp"
#include "changepoint.hpp"
#include "core.hpp"
#include "seasonal.hpp"
#include "smoothing.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace structdecomp {

enum class Stage { changepoint, anomaly, smoothing, seasonal };

inline std::string_view to_string(Stage s) {
    switch (s) {
    case Stage::changepoint: return "changepoint";
    case Stage::anomaly: return "anomaly";
    case Stage::smoothing: return "smoothing";
    case Stage::seasonal: return "seasonal";
    }
    return "?";
}

/// Optional instrumentation: called once per stage with the values that stage consumes.
struct PipelineObserver {
    std::function<void(Stage, std::span<const double>)> on_stage_input;

    void notify(Stage stage, std::span<const double> values) const {
        if (on_stage_input) on_stage_input(stage, values);
    }
};

namespace detail {

template <typename F>
auto run_stage(std::string_view stage, F&& body) {
    try {
        return body();
    } catch (const Error& err) {
        if (err.stage()) throw;
        throw err.with_context(std::string(stage));
    }
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

inline double variance(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size());
}

}  // namespace detail

/// Stage 1 only.
inline Partition detect_changepoints(std::span<const double> values, const PipelineConfig& config) {
    const std::size_t n = values.size();
    switch (config.changepoint_method) {
    case ChangepointMethod::pelt: return optimal_partition_pelt(values, config.penalty, config.min_segment_length);
    case ChangepointMethod::binseg: {
        const double beta = resolve_penalty(config.penalty, values);
        return {detect_binseg(values, PenaltyPolicy::fixed(beta), config.min_segment_length,
                              std::numeric_limits<std::size_t>::max()),
                std::numeric_limits<double>::quiet_NaN(), beta};
    }
    case ChangepointMethod::cusum:
        return {detect_cusum(values, config.cusum_critical_value, config.min_segment_length),
                std::numeric_limits<double>::quiet_NaN(), config.cusum_critical_value};
    case ChangepointMethod::none: return {ChangepointSet(n), 0.0, 0.0};
    }
    return {ChangepointSet(n), 0.0, 0.0};
}

/// Stage 2 on one segment. Segments too short for the method are left unflagged;
/// the rolling-median window shrinks to the largest odd size that fits.
inline AnomalyReport detect_segment_anomalies(std::span<const double> values, const PipelineConfig& config) {
    const std::size_t m = values.size();
    const double threshold = config.threshold_or_default();
    AnomalyReport none = detail::empty_report(m, config.anomaly_method, threshold);
    switch (config.anomaly_method) {
    case AnomalyMethod::none: return none;
    case AnomalyMethod::zscore: return m < 3 ? none : detect_zscore(values, threshold);
    case AnomalyMethod::mad: return m < 3 ? none : detect_mad(values, threshold);
    case AnomalyMethod::rolling_median: {
        std::size_t window = config.smoother_params.window.value_or(default_window(config.period));
        if (window > m) window = (m % 2 == 1) ? m : m - 1;
        return window < 3 ? none : detect_rolling_median(values, window, threshold);
    }
    }
    return none;
}

struct CleaningResult {
    AnomalyReport report;
    std::vector<double> cleaned;
};

/// Stage 2: per-segment detection on raw values, cap check, then the policy per segment.
inline CleaningResult detect_and_clean(std::span<const double> values, const ChangepointSet& changepoints,
                                       const PipelineConfig& config) {
    const std::size_t n = values.size();
    CleaningResult out;
    out.report = detail::empty_report(n, config.anomaly_method,
                                      config.anomaly_method == AnomalyMethod::none ? 0.0 : config.threshold_or_default());
    out.cleaned.assign(values.begin(), values.end());
    const auto segments = segments_from(changepoints);

    for (const Segment& seg : segments) {
        AnomalyReport part;
        try {
            part = detect_segment_anomalies(slice(values, seg), config);
        } catch (const Error& err) {
            throw err.with_context("anomaly", seg.id);
        }
        for (std::size_t k = 0; k < seg.length(); ++k) {
            out.report.flags[seg.start + k] = part.flags[k];
            out.report.scores[seg.start + k] = part.scores[k];
        }
    }

    const std::size_t cap = anomaly_cap(n, config.max_anomaly_fraction);
    if (out.report.flagged_count() > cap) {
        throw Error(ErrorCode::AnomalyCapExceeded, std::to_string(out.report.flagged_count()) +
                                                       " points flagged, cap is " + std::to_string(cap))
            .with_context("anomaly");
    }

    for (const Segment& seg : segments) {
        std::vector<bool> flags(out.report.flags.begin() + static_cast<std::ptrdiff_t>(seg.start),
                                out.report.flags.begin() + static_cast<std::ptrdiff_t>(seg.end + 1));
        try {
            auto cleaned = apply_policy(slice(values, seg), flags, config.anomaly_policy, seg.start);
            std::copy(cleaned.values.begin(), cleaned.values.end(),
                      out.cleaned.begin() + static_cast<std::ptrdiff_t>(seg.start));
            out.report.replacements.merge(cleaned.replacements);
        } catch (const Error& err) {
            throw err.with_context("anomaly", seg.id);
        }
    }
    return out;
}

/// Runs changepoint detection, anomaly handling, per-segment smoothing and the
/// seasonal/residual split, in that order.
///
/// Each stage sees the output of the previous one: detectors run on the raw
/// values, the smoother on the cleaned values, the seasonal step on the
/// detrended cleaned values. For the multiplicative model the smoother runs on
/// log values and the trend is exponentiated back.
inline DecompositionResult decompose_structural(const TimeSeries& series, const PipelineConfig& config,
                                                const PipelineObserver& observer = {}) {
    const PipelineConfig cfg = detail::run_stage("config", [&] {
        config.validate();
        PipelineConfig r = config.resolved(series.period());
        if (r.period) TimeSeries::check_period(*r.period, series.size());
        return r;
    });
    const std::span<const double> raw = series.values();
    const std::size_t n = raw.size();

    DecompositionResult result;
    result.observed.assign(raw.begin(), raw.end());
    result.model = cfg.model;
    result.config_echo = cfg;
    result.time_labels = series.time_labels();

    auto clock = std::chrono::steady_clock::now();
    observer.notify(Stage::changepoint, raw);
    result.changepoints = detail::run_stage("changepoint", [&] { return detect_changepoints(raw, cfg).changepoints; });
    result.summary.timings.changepoint_ms = detail::elapsed_ms(clock);

    clock = std::chrono::steady_clock::now();
    observer.notify(Stage::anomaly, raw);
    auto cleaning = detail::run_stage("anomaly", [&] { return detect_and_clean(raw, result.changepoints, cfg); });
    result.anomalies = std::move(cleaning.report);
    result.cleaned = std::move(cleaning.cleaned);
    result.summary.timings.anomaly_ms = detail::elapsed_ms(clock);

    clock = std::chrono::steady_clock::now();
    if (cfg.model == DecompositionModel::multiplicative) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!(result.cleaned[i] > 0.0)) {
                throw Error(ErrorCode::NonPositiveValueForMultiplicative,
                            "multiplicative model needs positive values after anomaly handling", i)
                    .with_context("smoothing");
            }
        }
        std::vector<double> logs(n);
        for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(result.cleaned[i]);
        observer.notify(Stage::smoothing, logs);
        auto log_trend = detail::run_stage("smoothing", [&] {
            return smooth_segmented(logs, result.changepoints, cfg.smoother, cfg.smoother_params);
        });
        result.trend.resize(n);
        for (std::size_t i = 0; i < n; ++i) result.trend[i] = std::exp(log_trend[i]);
    } else {
        observer.notify(Stage::smoothing, result.cleaned);
        result.trend = detail::run_stage("smoothing", [&] {
            return smooth_segmented(result.cleaned, result.changepoints, cfg.smoother, cfg.smoother_params);
        });
    }
    result.summary.timings.smoothing_ms = detail::elapsed_ms(clock);

    clock = std::chrono::steady_clock::now();
    if (observer.on_stage_input) {
        std::vector<double> detrended(n);
        for (std::size_t i = 0; i < n; ++i) {
            detrended[i] = cfg.model == DecompositionModel::additive
                               ? result.cleaned[i] - result.trend[i]
                               : std::log(result.cleaned[i]) - std::log(result.trend[i]);
        }
        observer.notify(Stage::seasonal, detrended);
    }
    auto split = detail::run_stage("seasonal", [&] {
        return decompose_components(result.cleaned, result.trend, cfg.period, cfg.model);
    });
    result.seasonal = std::move(split.seasonal);
    result.residual = std::move(split.residual);
    result.summary.timings.seasonal_ms = detail::elapsed_ms(clock);

    auto& s = result.summary;
    s.n = n;
    s.segment_count = result.changepoints.segment_count();
    s.anomaly_count = result.anomalies.flagged_count();
    const double total = detail::variance(result.cleaned);
    if (total > 0.0) {
        s.trend_variance_share = detail::variance(result.trend) / total;
        s.seasonal_variance_share = detail::variance(result.seasonal) / total;
        s.residual_variance_share = detail::variance(result.residual) / total;
    }
    return result;
}

/// max |cleaned − (T + S + R)| for additive results, max |cleaned − T·S·R| for multiplicative.
inline double reconstruction_error(const DecompositionResult& r) {
    double worst = 0.0;
    for (std::size_t i = 0; i < r.cleaned.size(); ++i) {
        const double rebuilt = r.model == DecompositionModel::additive ? r.trend[i] + r.seasonal[i] + r.residual[i]
                                                                       : r.trend[i] * r.seasonal[i] * r.residual[i];
        worst = std::max(worst, std::abs(r.cleaned[i] - rebuilt));
    }
    return worst;
}

}  // namespace structdecomp
