#pragma once

#include "core.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace structdecomp {

/// Single-pass cyclic-subseries extraction: each phase gets the mean of the
/// detrended values at that phase, the phase means are centered to sum to
/// zero and then tiled over the series.
inline std::vector<double> extract_seasonal(std::span<const double> detrended, std::optional<std::size_t> period) {
    if (!period) throw Error(ErrorCode::PeriodMissing, "seasonal extraction needs a period");
    const std::size_t n = detrended.size();
    const std::size_t p = *period;
    if (p < 2) throw Error(ErrorCode::InvalidPeriod, "period must be at least 2");
    if (p > n / 2) {
        throw Error(ErrorCode::PeriodTooLarge,
                    "period " + std::to_string(p) + " exceeds half the series length " + std::to_string(n));
    }

    std::vector<double> phase_sum(p, 0.0);
    std::vector<std::size_t> phase_count(p, 0);
    for (std::size_t i = 0; i < n; ++i) {
        phase_sum[i % p] += detrended[i];
        ++phase_count[i % p];
    }
    std::vector<double> phase_mean(p);
    double grand = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        phase_mean[j] = phase_sum[j] / static_cast<double>(phase_count[j]);
        grand += phase_mean[j];
    }
    grand /= static_cast<double>(p);
    for (double& s : phase_mean) s -= grand;

    std::vector<double> seasonal(n);
    for (std::size_t i = 0; i < n; ++i) seasonal[i] = phase_mean[i % p];
    return seasonal;
}

struct SeasonalSplit {
    std::vector<double> seasonal;
    std::vector<double> residual;
};

/// Splits cleaned − trend into seasonal and residual parts.
///
/// Additive: S from the detrended series (zeros without a period), R = y − T − S.
/// Multiplicative: the same split is done on log y − log T and exponentiated,
/// so S is a factor with geometric mean 1 per cycle and y = T·S·R. The trend
/// passed in is used as is; the pipeline estimates it on log y for this model.
inline SeasonalSplit decompose_components(std::span<const double> cleaned, std::span<const double> trend,
                                          std::optional<std::size_t> period, DecompositionModel model) {
    const std::size_t n = cleaned.size();
    if (trend.size() != n) throw Error(ErrorCode::InvalidConfig, "trend length differs from series length");
    SeasonalSplit out{std::vector<double>(n), std::vector<double>(n)};

    if (model == DecompositionModel::additive) {
        std::vector<double> detrended(n);
        for (std::size_t i = 0; i < n; ++i) detrended[i] = cleaned[i] - trend[i];
        if (period) out.seasonal = extract_seasonal(detrended, period);
        for (std::size_t i = 0; i < n; ++i) out.residual[i] = cleaned[i] - trend[i] - out.seasonal[i];
        return out;
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!(cleaned[i] > 0.0)) {
            throw Error(ErrorCode::NonPositiveValueForMultiplicative, "multiplicative model needs positive values", i);
        }
        if (!(trend[i] > 0.0)) {
            throw Error(ErrorCode::NonPositiveValueForMultiplicative, "multiplicative model needs a positive trend", i);
        }
    }
    std::vector<double> log_detrended(n);
    for (std::size_t i = 0; i < n; ++i) log_detrended[i] = std::log(cleaned[i]) - std::log(trend[i]);
    std::vector<double> log_seasonal(n, 0.0);
    if (period) log_seasonal = extract_seasonal(log_detrended, period);
    for (std::size_t i = 0; i < n; ++i) {
        out.seasonal[i] = std::exp(log_seasonal[i]);
        out.residual[i] = std::exp(log_detrended[i] - log_seasonal[i]);
    }
    return out;
}

}  // namespace structdecomp
