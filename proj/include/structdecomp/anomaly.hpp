#pragma once

#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace structdecomp {

namespace detail {

inline bool is_constant(std::span<const double> values) {
    if (values.empty()) return true;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return *lo == *hi;
}

inline AnomalyReport empty_report(std::size_t n, AnomalyMethod method, double threshold) {
    AnomalyReport r;
    r.flags.assign(n, false);
    r.scores.assign(n, 0.0);
    r.method = method;
    r.threshold_used = threshold;
    return r;
}

inline void require_threshold(double threshold) {
    if (!(threshold > 0.0)) throw Error(ErrorCode::InvalidConfig, "threshold must be positive");
}

/// 1.4826·MAD, then 1.2533·mean-abs-dev, then 0 when both vanish.
inline double robust_scale(std::span<const double> values) {
    const double mad = median_abs_deviation(values);
    if (mad > 0.0) return kMadConsistency * mad;
    return kMeanAbsDevConsistency * mean_abs_deviation_from_median(values);
}

}  // namespace detail

/// Flags |y − mean| / sd > threshold (population sd).
inline AnomalyReport detect_zscore(std::span<const double> values, double threshold = kDefaultZscoreThreshold) {
    detail::require_threshold(threshold);
    const std::size_t n = values.size();
    if (n < 3) throw Error(ErrorCode::SegmentTooShort, "z-score needs at least 3 values", n);
    AnomalyReport r = detail::empty_report(n, AnomalyMethod::zscore, threshold);
    if (detail::is_constant(values)) return r;

    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd == 0.0) return r;
    for (std::size_t i = 0; i < n; ++i) {
        r.scores[i] = std::abs(values[i] - mean) / sd;
        r.flags[i] = r.scores[i] > threshold;
    }
    return r;
}

/// Flags |y − median| / robust scale > threshold.
inline AnomalyReport detect_mad(std::span<const double> values, double threshold = kDefaultMadThreshold) {
    detail::require_threshold(threshold);
    const std::size_t n = values.size();
    if (n < 3) throw Error(ErrorCode::SegmentTooShort, "MAD needs at least 3 values", n);
    AnomalyReport r = detail::empty_report(n, AnomalyMethod::mad, threshold);
    if (detail::is_constant(values)) return r;

    const double med = median(values);
    const double scale = detail::robust_scale(values);
    if (scale == 0.0) return r;
    for (std::size_t i = 0; i < n; ++i) {
        r.scores[i] = std::abs(values[i] - med) / scale;
        r.flags[i] = r.scores[i] > threshold;
    }
    return r;
}

/// Centered rolling median. Near the ends the window shrinks symmetrically, so
/// the first and last samples are their own median.
inline std::vector<double> rolling_median(std::span<const double> values, std::size_t window) {
    const std::size_t n = values.size();
    const std::size_t half = window / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t h = std::min({half, i, n - 1 - i});
        out[i] = median(values.subspan(i - h, 2 * h + 1));
    }
    return out;
}

/// Flags points whose deviation from the rolling median is large relative to
/// the robust scale of all such deviations.
inline AnomalyReport detect_rolling_median(std::span<const double> values, std::size_t window,
                                           double threshold = kDefaultRollingMedianThreshold) {
    detail::require_threshold(threshold);
    if (window % 2 == 0) throw Error(ErrorCode::EvenWindow, "rolling median window must be odd", window);
    if (window < 3) throw Error(ErrorCode::InvalidConfig, "rolling median window must be at least 3");
    const std::size_t n = values.size();
    if (n < window) throw Error(ErrorCode::SegmentTooShort, "segment shorter than the window", n);
    AnomalyReport r = detail::empty_report(n, AnomalyMethod::rolling_median, threshold);
    if (detail::is_constant(values)) return r;

    const std::vector<double> med = rolling_median(values, window);
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = values[i] - med[i];
    const double scale = detail::robust_scale(resid);
    if (scale == 0.0) return r;
    for (std::size_t i = 0; i < n; ++i) {
        r.scores[i] = std::abs(resid[i]) / scale;
        r.flags[i] = r.scores[i] > threshold;
    }
    return r;
}

struct CleanedValues {
    std::vector<double> values;
    std::map<std::size_t, double> replacements;
};

/// keep: identity. replace: flagged points are linearly interpolated between
/// the nearest unflagged neighbours; flagged runs at either end copy the
/// nearest unflagged value. Replacement indices are offset by `index_offset`.
inline CleanedValues apply_policy(std::span<const double> values, const std::vector<bool>& flags,
                                  AnomalyPolicy policy, std::size_t index_offset = 0) {
    const std::size_t n = values.size();
    if (flags.size() != n) throw Error(ErrorCode::InvalidConfig, "flags length differs from series length");
    CleanedValues out{std::vector<double>(values.begin(), values.end()), {}};
    if (policy == AnomalyPolicy::keep) return out;
    if (std::none_of(flags.begin(), flags.end(), [](bool f) { return f; })) return out;
    if (std::all_of(flags.begin(), flags.end(), [](bool f) { return f; })) {
        throw Error(ErrorCode::AllPointsFlagged, "no unflagged point to interpolate from");
    }

    std::size_t i = 0;
    while (i < n) {
        if (!flags[i]) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < n && flags[end]) ++end;  // run is [i, end)
        const bool has_left = i > 0;
        const bool has_right = end < n;
        for (std::size_t k = i; k < end; ++k) {
            double v;
            if (has_left && has_right) {
                const double y0 = values[i - 1];
                const double y1 = values[end];
                const double t = static_cast<double>(k - (i - 1)) / static_cast<double>(end - (i - 1));
                v = y0 + t * (y1 - y0);
            } else {
                v = has_left ? values[i - 1] : values[end];
            }
            out.values[k] = v;
            out.replacements.emplace(k + index_offset, v);
        }
        i = end;
    }
    return out;
}

inline CleanedValues apply_policy(const TimeSeries& series, const std::vector<bool>& flags, AnomalyPolicy policy) {
    return apply_policy(series.values(), flags, policy);
}

/// Largest flag count allowed by the anomaly cap for a series of length n.
inline std::size_t anomaly_cap(std::size_t n, double max_fraction) {
    return static_cast<std::size_t>(std::ceil(max_fraction * static_cast<double>(n) - 1e-9));
}

}  // namespace structdecomp
