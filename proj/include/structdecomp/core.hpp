#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace structdecomp {

enum class ErrorCode {
    EmptySeries,
    NonFiniteValue,
    LeadingOrTrailingMissing,
    LabelLengthMismatch,
    InvalidPeriod,
    InvalidChangepoints,
    SeriesTooShort,
    OracleSizeExceeded,
    SegmentTooShort,
    EvenWindow,
    WindowTooLarge,
    AllPointsFlagged,
    AnomalyCapExceeded,
    PeriodTooLarge,
    PeriodMissing,
    NonPositiveValueForMultiplicative,
    InvalidConfig,
    InvalidSpec,
    FileWriteError,
    InputError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::LeadingOrTrailingMissing: return "LeadingOrTrailingMissing";
    case ErrorCode::LabelLengthMismatch: return "LabelLengthMismatch";
    case ErrorCode::InvalidPeriod: return "InvalidPeriod";
    case ErrorCode::InvalidChangepoints: return "InvalidChangepoints";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::OracleSizeExceeded: return "OracleSizeExceeded";
    case ErrorCode::SegmentTooShort: return "SegmentTooShort";
    case ErrorCode::EvenWindow: return "EvenWindow";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::AllPointsFlagged: return "AllPointsFlagged";
    case ErrorCode::AnomalyCapExceeded: return "AnomalyCapExceeded";
    case ErrorCode::PeriodTooLarge: return "PeriodTooLarge";
    case ErrorCode::PeriodMissing: return "PeriodMissing";
    case ErrorCode::NonPositiveValueForMultiplicative: return "NonPositiveValueForMultiplicative";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::FileWriteError: return "FileWriteError";
    case ErrorCode::InputError: return "InputError";
    }
    return "Unknown";
}

/// Library error. Carries a machine-readable code, the offending index when
/// there is one, and (once it has crossed the pipeline) the stage and segment
/// it came from.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail, std::optional<std::size_t> index = std::nullopt)
        : Error(code, detail, index, std::nullopt, std::nullopt) {}

    ErrorCode code() const noexcept { return code_; }
    std::optional<std::size_t> index() const noexcept { return index_; }
    const std::optional<std::string>& stage() const noexcept { return stage_; }
    std::optional<std::size_t> segment() const noexcept { return segment_; }
    const std::string& detail() const noexcept { return detail_; }

    Error with_context(std::string stage, std::optional<std::size_t> segment = std::nullopt) const {
        return Error(code_, detail_, index_, std::move(stage), segment ? segment : segment_);
    }

private:
    Error(ErrorCode code, std::string detail, std::optional<std::size_t> index, std::optional<std::string> stage,
          std::optional<std::size_t> segment)
        : std::runtime_error(compose(code, detail, index, stage, segment)),
          code_(code),
          index_(index),
          stage_(std::move(stage)),
          segment_(segment),
          detail_(std::move(detail)) {}

    static std::string compose(ErrorCode code, const std::string& detail, std::optional<std::size_t> index,
                               const std::optional<std::string>& stage, std::optional<std::size_t> segment) {
        std::string msg;
        if (stage) {
            msg += "[stage " + *stage;
            if (segment) msg += ", segment " + std::to_string(*segment);
            msg += "] ";
        }
        msg += std::string(to_string(code));
        if (index) msg += "(" + std::to_string(*index) + ")";
        if (!detail.empty()) msg += ": " + detail;
        return msg;
    }

    ErrorCode code_;
    std::optional<std::size_t> index_;
    std::optional<std::string> stage_;
    std::optional<std::size_t> segment_;
    std::string detail_;
};

// ---------------------------------------------------------------------------
// Small statistics helpers shared by several stages.

/// Median with the usual even-length convention (mean of the two middle values).
inline double median(std::span<const double> values) {
    if (values.empty()) return 0.0;
    std::vector<double> v(values.begin(), values.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lower);
    }
    return m;
}

/// Raw (unscaled) median absolute deviation from the median.
inline double median_abs_deviation(std::span<const double> values) {
    const double med = median(values);
    std::vector<double> dev(values.size());
    std::transform(values.begin(), values.end(), dev.begin(), [med](double v) { return std::abs(v - med); });
    return median(dev);
}

/// Mean absolute deviation from the median.
inline double mean_abs_deviation_from_median(std::span<const double> values) {
    if (values.empty()) return 0.0;
    const double med = median(values);
    double acc = 0.0;
    for (double v : values) acc += std::abs(v - med);
    return acc / static_cast<double>(values.size());
}

inline constexpr double kMadConsistency = 1.4826;
inline constexpr double kMeanAbsDevConsistency = 1.2533;
inline constexpr double kNormalQuartile = 0.6745;

/// Robust noise scale from first differences: MAD(diff) / (sqrt(2) * 0.6745).
/// Differencing cancels slowly varying level so steps barely move the estimate.
inline double robust_sigma_from_differences(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    std::vector<double> diffs(values.size() - 1);
    for (std::size_t i = 1; i < values.size(); ++i) diffs[i - 1] = values[i] - values[i - 1];
    return median_abs_deviation(diffs) / (std::sqrt(2.0) * kNormalQuartile);
}

// ---------------------------------------------------------------------------
// Domain types

/// Observed signal. Values are finite; labels are opaque and never parsed.
class TimeSeries {
public:
    explicit TimeSeries(std::vector<double> values, std::optional<std::vector<std::string>> time_labels = std::nullopt,
                        std::optional<std::size_t> period = std::nullopt)
        : values_(std::move(values)), labels_(std::move(time_labels)), period_(period) {
        if (values_.empty()) throw Error(ErrorCode::EmptySeries, "series has no values");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) throw Error(ErrorCode::NonFiniteValue, "value is not finite", i);
        }
        if (labels_ && labels_->size() != values_.size()) {
            throw Error(ErrorCode::LabelLengthMismatch, std::to_string(labels_->size()) + " labels for " +
                                                            std::to_string(values_.size()) + " values");
        }
        if (period_) check_period(*period_, values_.size());
    }

    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    const std::optional<std::vector<std::string>>& time_labels() const noexcept { return labels_; }
    std::optional<std::size_t> period() const noexcept { return period_; }

    TimeSeries with_values(std::vector<double> values) const { return TimeSeries(std::move(values), labels_, period_); }
    TimeSeries with_period(std::optional<std::size_t> period) const { return TimeSeries(values_, labels_, period); }

    static void check_period(std::size_t period, std::size_t n) {
        if (period < 2) throw Error(ErrorCode::InvalidPeriod, "period must be at least 2");
        if (period > n / 2) {
            throw Error(ErrorCode::PeriodTooLarge,
                        "period " + std::to_string(period) + " exceeds half the series length " + std::to_string(n));
        }
    }

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    std::vector<double> values_;
    std::optional<std::vector<std::string>> labels_;
    std::optional<std::size_t> period_;
};

/// Ordered break indices. A break b is the last index of the segment to its left.
class ChangepointSet {
public:
    explicit ChangepointSet(std::size_t n, std::vector<std::size_t> breaks = {}) : breaks_(std::move(breaks)), n_(n) {
        if (n_ == 0) throw Error(ErrorCode::InvalidChangepoints, "series length must be positive");
        for (std::size_t k = 0; k < breaks_.size(); ++k) {
            if (breaks_[k] + 1 >= n_) {
                throw Error(ErrorCode::InvalidChangepoints, "break must satisfy b < n - 1", breaks_[k]);
            }
            if (k > 0 && breaks_[k] <= breaks_[k - 1]) {
                throw Error(ErrorCode::InvalidChangepoints, "breaks must be strictly increasing", breaks_[k]);
            }
        }
    }

    std::span<const std::size_t> breaks() const noexcept { return breaks_; }
    std::size_t series_length() const noexcept { return n_; }
    std::size_t segment_count() const noexcept { return breaks_.size() + 1; }
    bool empty() const noexcept { return breaks_.empty(); }

    friend bool operator==(const ChangepointSet&, const ChangepointSet&) = default;

private:
    std::vector<std::size_t> breaks_;
    std::size_t n_;
};

struct Segment {
    std::size_t start = 0;
    std::size_t end = 0;  // inclusive
    std::size_t id = 0;

    std::size_t length() const noexcept { return end - start + 1; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

inline std::vector<Segment> segments_from(const ChangepointSet& changepoints) {
    std::vector<Segment> segments;
    segments.reserve(changepoints.segment_count());
    std::size_t start = 0;
    for (std::size_t b : changepoints.breaks()) {
        segments.push_back({start, b, segments.size()});
        start = b + 1;
    }
    segments.push_back({start, changepoints.series_length() - 1, segments.size()});
    return segments;
}

template <typename T>
std::span<const T> slice(std::span<const T> values, const Segment& seg) {
    return values.subspan(seg.start, seg.length());
}

enum class ChangepointMethod { pelt, binseg, cusum, none };
enum class AnomalyMethod { rolling_median, zscore, mad, none };
enum class AnomalyPolicy { replace, keep };
enum class SmootherMethod { lowess, moving_average, penalized };
enum class DecompositionModel { additive, multiplicative };

inline std::string_view to_string(ChangepointMethod m) {
    switch (m) {
    case ChangepointMethod::pelt: return "pelt";
    case ChangepointMethod::binseg: return "binseg";
    case ChangepointMethod::cusum: return "cusum";
    case ChangepointMethod::none: return "none";
    }
    return "?";
}

inline std::string_view to_string(AnomalyMethod m) {
    switch (m) {
    case AnomalyMethod::rolling_median: return "rolling_median";
    case AnomalyMethod::zscore: return "zscore";
    case AnomalyMethod::mad: return "mad";
    case AnomalyMethod::none: return "none";
    }
    return "?";
}

inline std::string_view to_string(AnomalyPolicy p) { return p == AnomalyPolicy::replace ? "replace" : "keep"; }

inline std::string_view to_string(SmootherMethod m) {
    switch (m) {
    case SmootherMethod::lowess: return "lowess";
    case SmootherMethod::moving_average: return "moving_average";
    case SmootherMethod::penalized: return "penalized";
    }
    return "?";
}

inline std::string_view to_string(DecompositionModel m) {
    return m == DecompositionModel::additive ? "additive" : "multiplicative";
}

/// Per-break cost in the segmentation objective: either resolved from the data
/// (`automatic`) or a fixed positive value.
struct PenaltyPolicy {
    enum class Mode { automatic, fixed };
    Mode mode = Mode::automatic;
    double value = 0.0;

    static PenaltyPolicy automatic() { return {}; }
    static PenaltyPolicy fixed(double beta) {
        if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::InvalidConfig, "penalty must be positive");
        return {Mode::fixed, beta};
    }
    friend bool operator==(const PenaltyPolicy&, const PenaltyPolicy&) = default;
};

/// Flags and scores for every point of a series (or of one segment).
struct AnomalyReport {
    std::vector<bool> flags;
    std::vector<double> scores;
    AnomalyMethod method = AnomalyMethod::none;
    std::map<std::size_t, double> replacements;
    double threshold_used = 0.0;

    std::size_t flagged_count() const {
        return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
    }
    std::vector<std::size_t> flagged_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < flags.size(); ++i)
            if (flags[i]) out.push_back(i);
        return out;
    }
};

inline constexpr double kDefaultZscoreThreshold = 3.0;
inline constexpr double kDefaultMadThreshold = 3.5;
inline constexpr double kDefaultRollingMedianThreshold = 3.0;
inline constexpr double kDefaultCusumCritical = 1.358;

/// Odd window tied to the seasonal period when one is known.
inline std::size_t default_window(std::optional<std::size_t> period) {
    return period ? 2 * (*period / 2) + 1 : 11;
}

struct SmootherParams {
    double span = 0.3;
    std::size_t robustness_iterations = 2;
    std::optional<std::size_t> window;  // resolved from the period when absent
    double lambda = 1600.0;
    friend bool operator==(const SmootherParams&, const SmootherParams&) = default;
};

/// Every knob of the pipeline. Optional fields are materialized by `resolved()`.
struct PipelineConfig {
    ChangepointMethod changepoint_method = ChangepointMethod::pelt;
    PenaltyPolicy penalty = PenaltyPolicy::automatic();
    std::size_t min_segment_length = 10;
    double cusum_critical_value = kDefaultCusumCritical;
    AnomalyMethod anomaly_method = AnomalyMethod::rolling_median;
    std::optional<double> anomaly_threshold;
    AnomalyPolicy anomaly_policy = AnomalyPolicy::replace;
    double max_anomaly_fraction = 0.2;
    SmootherMethod smoother = SmootherMethod::lowess;
    SmootherParams smoother_params;
    DecompositionModel model = DecompositionModel::additive;
    std::optional<std::size_t> period;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;

    double threshold_or_default() const {
        if (anomaly_threshold) return *anomaly_threshold;
        switch (anomaly_method) {
        case AnomalyMethod::zscore: return kDefaultZscoreThreshold;
        case AnomalyMethod::mad: return kDefaultMadThreshold;
        case AnomalyMethod::rolling_median: return kDefaultRollingMedianThreshold;
        case AnomalyMethod::none: return 0.0;
        }
        return 0.0;
    }

    /// Throws InvalidConfig when a parameter is out of range.
    void validate() const {
        auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
        if (min_segment_length < 1) fail("min_segment_length must be positive");
        if (penalty.mode == PenaltyPolicy::Mode::fixed && !(penalty.value > 0.0)) fail("penalty must be positive");
        if (!(cusum_critical_value > 0.0)) fail("cusum critical value must be positive");
        if (anomaly_threshold && !(*anomaly_threshold > 0.0)) fail("anomaly threshold must be positive");
        if (!(max_anomaly_fraction > 0.0) || max_anomaly_fraction > 1.0) fail("max_anomaly_fraction must be in (0, 1]");
        if (!(smoother_params.span > 0.0) || smoother_params.span > 1.0) fail("span must be in (0, 1]");
        if (smoother_params.window && (*smoother_params.window < 3 || *smoother_params.window % 2 == 0)) {
            fail("window must be an odd integer >= 3");
        }
        if (!(smoother_params.lambda >= 0.0) || !std::isfinite(smoother_params.lambda)) fail("lambda must be >= 0");
        if (period && *period < 2) fail("period must be at least 2");
    }

    /// Copy with defaults filled in against `series_period` (used when no period is configured).
    PipelineConfig resolved(std::optional<std::size_t> series_period) const {
        PipelineConfig out = *this;
        if (!out.period) out.period = series_period;
        if (out.anomaly_method != AnomalyMethod::none) out.anomaly_threshold = threshold_or_default();
        if (!out.smoother_params.window) out.smoother_params.window = default_window(out.period);
        return out;
    }
};

struct StageTimings {
    double changepoint_ms = 0.0;
    double anomaly_ms = 0.0;
    double smoothing_ms = 0.0;
    double seasonal_ms = 0.0;
};

struct DecompositionSummary {
    std::size_t n = 0;
    std::size_t segment_count = 0;
    std::size_t anomaly_count = 0;
    /// Variance of each component divided by the variance of the cleaned series.
    double trend_variance_share = 0.0;
    double seasonal_variance_share = 0.0;
    double residual_variance_share = 0.0;
    StageTimings timings;
};

/// All stage outputs, aligned with the input series.
struct DecompositionResult {
    std::vector<double> observed;
    std::vector<double> cleaned;
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<double> residual;
    DecompositionModel model = DecompositionModel::additive;
    ChangepointSet changepoints{1};
    AnomalyReport anomalies;
    PipelineConfig config_echo;
    std::optional<std::vector<std::string>> time_labels;
    DecompositionSummary summary;

    std::vector<Segment> segments() const { return segments_from(changepoints); }
};

/// Accepts raw values where `std::nullopt` (or NaN) marks a missing sample.
/// Missing data is rejected unless `impute` is set, in which case interior
/// runs are linearly interpolated; leading/trailing gaps are always rejected.
inline TimeSeries validate_series(std::span<const std::optional<double>> raw,
                                  std::optional<std::vector<std::string>> time_labels = std::nullopt,
                                  bool impute = false, std::optional<std::size_t> period = std::nullopt) {
    if (raw.empty()) throw Error(ErrorCode::EmptySeries, "series has no values");
    const std::size_t n = raw.size();
    auto missing = [&](std::size_t i) { return !raw[i] || std::isnan(*raw[i]); };

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (missing(i)) {
            if (!impute) throw Error(ErrorCode::NonFiniteValue, "missing value", i);
            continue;
        }
        if (!std::isfinite(*raw[i])) throw Error(ErrorCode::NonFiniteValue, "value is infinite", i);
        values[i] = *raw[i];
    }
    if (impute) {
        if (missing(0)) throw Error(ErrorCode::LeadingOrTrailingMissing, "leading missing value", 0);
        if (missing(n - 1)) throw Error(ErrorCode::LeadingOrTrailingMissing, "trailing missing value", n - 1);
        std::size_t i = 1;
        while (i < n) {
            if (!missing(i)) {
                ++i;
                continue;
            }
            const std::size_t left = i - 1;
            std::size_t right = i;
            while (missing(right)) ++right;
            const double y0 = values[left];
            const double y1 = values[right];
            const double span = static_cast<double>(right - left);
            for (std::size_t k = left + 1; k < right; ++k) {
                const double t = static_cast<double>(k - left) / span;
                values[k] = y0 + t * (y1 - y0);
            }
            i = right + 1;
        }
    }
    return TimeSeries(std::move(values), std::move(time_labels), period);
}

inline TimeSeries validate_series(std::span<const double> raw,
                                  std::optional<std::vector<std::string>> time_labels = std::nullopt,
                                  bool impute = false, std::optional<std::size_t> period = std::nullopt) {
    std::vector<std::optional<double>> wrapped(raw.begin(), raw.end());
    return validate_series(std::span<const std::optional<double>>(wrapped), std::move(time_labels), impute, period);
}

}  // namespace structdecomp
