#pragma once

#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace structdecomp {

inline constexpr std::size_t kLowessMinLength = 4;
inline constexpr std::size_t kPenalizedMinLength = 4;

namespace detail {

inline double tricube(double u) {
    const double a = 1.0 - u * u * u;
    return a * a * a;
}

/// Degree-1 weighted fit at index i over the contiguous neighbourhood of q points.
/// Coordinates are centered on i and values on y_i, so the fitted value is the
/// intercept and constants come back bit-exact.
inline double local_linear_fit(std::span<const double> y, std::span<const double> robustness, std::size_t i,
                               std::size_t q) {
    const std::size_t m = y.size();
    const std::size_t back = q / 2;  // ceil((q-1)/2): the lower side wins distance ties
    const std::size_t lo = std::min(i >= back ? i - back : 0, m - q);
    const std::size_t hi = lo + q - 1;
    const double dmax = static_cast<double>(std::max(i - lo, hi - i));

    auto fit_with = [&](bool use_robustness) -> std::pair<bool, double> {
        double sw = 0.0, sx = 0.0, su = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            const double x = static_cast<double>(j) - static_cast<double>(i);
            double w = dmax > 0.0 ? tricube(std::abs(x) / dmax) : 1.0;
            if (use_robustness) w *= robustness[j];
            sw += w;
            sx += w * x;
            su += w * (y[j] - y[i]);
        }
        if (!(sw > 0.0)) return {false, 0.0};
        const double xm = sx / sw;
        const double um = su / sw;
        double sxx = 0.0, sxu = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            const double x = static_cast<double>(j) - static_cast<double>(i);
            double w = dmax > 0.0 ? tricube(std::abs(x) / dmax) : 1.0;
            if (use_robustness) w *= robustness[j];
            sxx += w * (x - xm) * (x - xm);
            sxu += w * (x - xm) * (y[j] - y[i] - um);
        }
        if (sxx <= 1e-12 * sw * dmax * dmax) return {true, um};
        return {true, um - (sxu / sxx) * xm};
    };

    auto result = fit_with(true);
    if (!result.first) result = fit_with(false);
    return y[i] + result.second;
}

}  // namespace detail

/// Neighbourhood size used by lowess for a segment of length m.
inline std::size_t lowess_neighbourhood(double span, std::size_t m) {
    const auto q = static_cast<std::size_t>(std::ceil(span * static_cast<double>(m) - 1e-9));
    return std::min(m, std::max<std::size_t>(q, 3));
}

/// Locally linear regression with tricube weights over the q nearest indices,
/// followed by `robustness_iterations` bisquare reweighting passes.
inline std::vector<double> smooth_lowess(std::span<const double> values, double span = 0.3,
                                         std::size_t robustness_iterations = 2) {
    const std::size_t m = values.size();
    if (m < kLowessMinLength) throw Error(ErrorCode::SegmentTooShort, "lowess needs at least 4 values", m);
    if (!(span > 0.0) || span > 1.0) throw Error(ErrorCode::InvalidConfig, "span must be in (0, 1]");
    const std::size_t q = lowess_neighbourhood(span, m);

    std::vector<double> robustness(m, 1.0);
    std::vector<double> fit(m);
    for (std::size_t i = 0; i < m; ++i) fit[i] = detail::local_linear_fit(values, robustness, i, q);

    std::vector<double> abs_resid(m);
    for (std::size_t iter = 0; iter < robustness_iterations; ++iter) {
        for (std::size_t i = 0; i < m; ++i) abs_resid[i] = std::abs(values[i] - fit[i]);
        const double med = median(abs_resid);
        if (med == 0.0) break;
        const double h = 6.0 * med;
        for (std::size_t i = 0; i < m; ++i) {
            const double u = abs_resid[i] / h;
            robustness[i] = u < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
        }
        for (std::size_t i = 0; i < m; ++i) fit[i] = detail::local_linear_fit(values, robustness, i, q);
    }
    return fit;
}

/// Centered moving average; the window shrinks symmetrically at the ends.
inline std::vector<double> smooth_moving_average(std::span<const double> values, std::size_t window) {
    const std::size_t m = values.size();
    if (window % 2 == 0) throw Error(ErrorCode::EvenWindow, "moving average window must be odd", window);
    if (window < 3) throw Error(ErrorCode::InvalidConfig, "moving average window must be at least 3");
    if (window > m) throw Error(ErrorCode::WindowTooLarge, "window exceeds segment length", window);
    const std::size_t half = window / 2;
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t h = std::min({half, i, m - 1 - i});
        double acc = 0.0;
        for (std::size_t j = i - h; j <= i + h; ++j) acc += values[j] - values[i];
        out[i] = values[i] + acc / static_cast<double>(2 * h + 1);
    }
    return out;
}

/// Solves (I + λ D₂ᵀD₂) z = y by an LDLᵀ factorization of the pentadiagonal matrix.
inline std::vector<double> solve_whittaker_system(std::span<const double> y, double lambda) {
    const std::size_t m = y.size();
    // bands of A: diagonal, first and second superdiagonal
    std::vector<double> d(m, 1.0), e(m, 0.0), f(m, 0.0);
    constexpr double c[3] = {1.0, -2.0, 1.0};
    for (std::size_t r = 0; r + 2 < m; ++r) {
        for (std::size_t a = 0; a < 3; ++a) {
            d[r + a] += lambda * c[a] * c[a];
            if (a + 1 < 3) e[r + a] += lambda * c[a] * c[a + 1];
            if (a + 2 < 3) f[r + a] += lambda * c[a] * c[a + 2];
        }
    }

    std::vector<double> diag(m), l1(m, 0.0), l2(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (i >= 2) l2[i] = f[i - 2] / diag[i - 2];
        if (i >= 1) {
            const double coupling = i >= 2 ? l2[i] * diag[i - 2] * l1[i - 1] : 0.0;
            l1[i] = (e[i - 1] - coupling) / diag[i - 1];
        }
        diag[i] = d[i];
        if (i >= 1) diag[i] -= l1[i] * l1[i] * diag[i - 1];
        if (i >= 2) diag[i] -= l2[i] * l2[i] * diag[i - 2];
    }

    std::vector<double> z(y.begin(), y.end());
    for (std::size_t i = 1; i < m; ++i) {
        z[i] -= l1[i] * z[i - 1];
        if (i >= 2) z[i] -= l2[i] * z[i - 2];
    }
    for (std::size_t i = 0; i < m; ++i) z[i] /= diag[i];
    for (std::size_t i = m; i-- > 0;) {
        if (i + 1 < m) z[i] -= l1[i + 1] * z[i + 1];
        if (i + 2 < m) z[i] -= l2[i + 2] * z[i + 2];
    }
    return z;
}

/// Whittaker smoother: argmin Σ(y − z)² + λ Σ(Δ²z)².
inline std::vector<double> smooth_penalized(std::span<const double> values, double lambda = 1600.0) {
    const std::size_t m = values.size();
    if (m < kPenalizedMinLength) throw Error(ErrorCode::SegmentTooShort, "penalized smoother needs at least 4 values", m);
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidConfig, "lambda must be >= 0");
    std::vector<double> out(values.begin(), values.end());
    if (lambda == 0.0) return out;
    // Lines are in the null space of the penalty. Solving for the residual of
    // the least-squares line keeps affine inputs exact even for huge λ.
    const double n = static_cast<double>(m);
    const double xm = (n - 1.0) / 2.0;
    double ym = 0.0;
    for (double v : values) ym += v;
    ym /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double x = static_cast<double>(i) - xm;
        sxy += x * (values[i] - ym);
        sxx += x * x;
    }
    const double slope = sxy / sxx;
    auto line = [&](std::size_t i) { return ym + slope * (static_cast<double>(i) - xm); };
    for (std::size_t i = 0; i < m; ++i) out[i] = values[i] - line(i);
    out = solve_whittaker_system(out, lambda);
    for (std::size_t i = 0; i < m; ++i) out[i] += line(i);
    return out;
}

/// Σ(y − z)² + λ Σ(Δ²z)²
inline double whittaker_objective(std::span<const double> y, std::span<const double> z, double lambda) {
    double fit = 0.0, rough = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) fit += (y[i] - z[i]) * (y[i] - z[i]);
    for (std::size_t i = 1; i + 1 < z.size(); ++i) {
        const double d2 = z[i + 1] - 2.0 * z[i] + z[i - 1];
        rough += d2 * d2;
    }
    return fit + lambda * rough;
}

/// Smallest segment a smoother can handle; shorter segments fall back to their mean.
inline std::size_t smoother_min_length(SmootherMethod method, const SmootherParams& params) {
    switch (method) {
    case SmootherMethod::lowess: return kLowessMinLength;
    case SmootherMethod::penalized: return kPenalizedMinLength;
    case SmootherMethod::moving_average: return params.window.value_or(default_window(std::nullopt));
    }
    return 1;
}

inline std::vector<double> smooth(std::span<const double> values, SmootherMethod method, const SmootherParams& params) {
    switch (method) {
    case SmootherMethod::lowess: return smooth_lowess(values, params.span, params.robustness_iterations);
    case SmootherMethod::moving_average:
        return smooth_moving_average(values, params.window.value_or(default_window(std::nullopt)));
    case SmootherMethod::penalized: return smooth_penalized(values, params.lambda);
    }
    return {};
}

/// Applies the smoother to each segment independently; no window crosses a break.
inline std::vector<double> smooth_segmented(std::span<const double> values, const ChangepointSet& changepoints,
                                            SmootherMethod method, const SmootherParams& params) {
    if (values.size() != changepoints.series_length()) {
        throw Error(ErrorCode::InvalidChangepoints, "changepoints do not match series length");
    }
    const std::size_t min_len = smoother_min_length(method, params);
    std::vector<double> trend(values.size());
    for (const Segment& seg : segments_from(changepoints)) {
        const auto part = slice(values, seg);
        if (part.size() < min_len) {
            const double mean = std::accumulate(part.begin(), part.end(), 0.0) / static_cast<double>(part.size());
            std::fill_n(trend.begin() + static_cast<std::ptrdiff_t>(seg.start), seg.length(), mean);
            continue;
        }
        try {
            const auto fitted = smooth(part, method, params);
            std::copy(fitted.begin(), fitted.end(), trend.begin() + static_cast<std::ptrdiff_t>(seg.start));
        } catch (const Error& err) {
            throw err.with_context("smoothing", seg.id);
        }
    }
    return trend;
}

inline std::vector<double> smooth_segmented(const TimeSeries& series, const ChangepointSet& changepoints,
                                            SmootherMethod method, const SmootherParams& params) {
    return smooth_segmented(series.values(), changepoints, method, params);
}

}  // namespace structdecomp
