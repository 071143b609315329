#pragma once

#include "core.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

namespace structdecomp {

/// SplitMix64 stream (Steele, Lea & Flood). State advances by the golden-ratio
/// increment and each output is the usual xor-shift/multiply finalizer.
///
/// Uniforms take the top 53 bits: u = (x >> 11) · 2⁻⁵³ ∈ [0, 1).
/// Normals use the Marsaglia polar method on pairs v = 2u − 1: accept when
/// 0 < s = v₁² + v₂² < 1, return v₁·√(−2 ln s / s) and cache v₂·√(−2 ln s / s)
/// for the next call. Only +, ×, √ and ln are involved, so the stream is
/// reproducible wherever ln is correctly rounded (glibc, musl, MSVC UCRT).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double normal() {
        if (cached_) {
            const double v = *cached_;
            cached_.reset();
            return v;
        }
        for (;;) {
            const double v1 = 2.0 * uniform() - 1.0;
            const double v2 = 2.0 * uniform() - 1.0;
            const double s = v1 * v1 + v2 * v2;
            if (s <= 0.0 || s >= 1.0) continue;
            const double f = std::sqrt(-2.0 * std::log(s) / s);
            cached_ = v2 * f;
            return v1 * f;
        }
    }

    /// Uniform integer in [lo, hi] by rejection-free scaling of a uniform draw.
    std::size_t uniform_index(std::size_t lo, std::size_t hi) {
        return lo + static_cast<std::size_t>(uniform() * static_cast<double>(hi - lo + 1));
    }

private:
    std::uint64_t state_;
    std::optional<double> cached_;
};

struct TrendBreak {
    std::size_t index = 0;  // last sample of the old regime
    double new_slope = 0.0;
    double level_jump = 0.0;
};

/// Recipe for a synthetic series with known components.
struct SyntheticSpec {
    std::size_t n = 200;
    double base_level = 0.0;
    double base_slope = 0.0;
    std::vector<TrendBreak> trend_breaks;
    double seasonal_amplitude = 0.0;
    std::optional<std::size_t> period;
    double noise_sd = 0.0;
    std::vector<std::size_t> spike_indices;
    double spike_magnitude = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticSeries {
    TimeSeries series;
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<double> noise;
    std::vector<double> spikes;
    std::vector<std::size_t> true_breaks;
    std::vector<std::size_t> true_anomalies;
};

/// Piecewise-linear trend + amplitude·sin(2πt/period) + N(0, noise_sd²) noise,
/// plus ±spike_magnitude at the listed indices.
///
/// Draw order from the seed: n normals for the noise (drawn even when
/// noise_sd = 0), then one uniform per spike in listed order; u < 0.5 gives a
/// negative spike.
inline SyntheticSeries generate_synthetic(const SyntheticSpec& spec) {
    const std::size_t n = spec.n;
    auto invalid = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
    if (n < 1) invalid("n must be positive");
    if (spec.seasonal_amplitude != 0.0 && !spec.period) invalid("seasonal amplitude needs a period");
    if (spec.period && (*spec.period < 2 || *spec.period > n / 2)) invalid("period must be in [2, n/2]");
    if (!(spec.noise_sd >= 0.0)) invalid("noise_sd must be non-negative");
    for (std::size_t k = 0; k < spec.trend_breaks.size(); ++k) {
        const auto b = spec.trend_breaks[k].index;
        if (b + 1 >= n) invalid("trend break out of range");
        if (k > 0 && b <= spec.trend_breaks[k - 1].index) invalid("trend breaks must be strictly increasing");
    }
    for (std::size_t idx : spec.spike_indices)
        if (idx >= n) invalid("spike index out of range");

    std::vector<double> trend(n);
    {
        double level = spec.base_level;
        double slope = spec.base_slope;
        std::size_t start = 0;
        std::size_t next = 0;
        for (std::size_t t = 0; t < n; ++t) {
            if (next < spec.trend_breaks.size() && t == spec.trend_breaks[next].index + 1) {
                const auto& br = spec.trend_breaks[next];
                level = level + slope * static_cast<double>(t - start) + br.level_jump;
                slope = br.new_slope;
                start = t;
                ++next;
            }
            trend[t] = level + slope * static_cast<double>(t - start);
        }
    }

    std::vector<double> seasonal(n, 0.0);
    if (spec.period && spec.seasonal_amplitude != 0.0) {
        const double p = static_cast<double>(*spec.period);
        for (std::size_t t = 0; t < n; ++t) {
            seasonal[t] = spec.seasonal_amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / p);
        }
    }

    SplitMix64 rng(spec.seed);
    std::vector<double> noise(n);
    for (std::size_t t = 0; t < n; ++t) noise[t] = spec.noise_sd * rng.normal();

    std::vector<double> spikes(n, 0.0);
    for (std::size_t idx : spec.spike_indices) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        spikes[idx] += sign * spec.spike_magnitude;
    }

    std::vector<double> values(n);
    for (std::size_t t = 0; t < n; ++t) values[t] = trend[t] + seasonal[t] + noise[t] + spikes[t];

    std::vector<std::size_t> breaks;
    for (const auto& br : spec.trend_breaks) breaks.push_back(br.index);
    std::vector<std::size_t> anomalies = spec.spike_indices;
    std::sort(anomalies.begin(), anomalies.end());
    anomalies.erase(std::unique(anomalies.begin(), anomalies.end()), anomalies.end());

    return {TimeSeries(std::move(values), std::nullopt, spec.period),
            std::move(trend),
            std::move(seasonal),
            std::move(noise),
            std::move(spikes),
            std::move(breaks),
            std::move(anomalies)};
}

/// Draws `count` distinct indices in [lo, hi] from `rng`, sorted ascending.
inline std::vector<std::size_t> sample_distinct_indices(SplitMix64& rng, std::size_t count, std::size_t lo,
                                                        std::size_t hi) {
    std::vector<std::size_t> out;
    if (hi < lo || count > hi - lo + 1) throw Error(ErrorCode::InvalidSpec, "cannot sample that many indices");
    std::vector<bool> taken(hi - lo + 1, false);
    while (out.size() < count) {
        const std::size_t k = rng.uniform_index(lo, hi);
        if (taken[k - lo]) continue;
        taken[k - lo] = true;
        out.push_back(k);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Break positions in [margin, n − margin) with every gap ≥ min_gap, drawn by
/// rejection from `rng`.
inline std::vector<std::size_t> sample_separated_breaks(SplitMix64& rng, std::size_t count, std::size_t n,
                                                        std::size_t min_gap) {
    if (count == 0) return {};
    if ((count + 1) * min_gap > n) throw Error(ErrorCode::InvalidSpec, "breaks cannot be separated that far");
    for (;;) {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < count; ++k) out.push_back(rng.uniform_index(min_gap - 1, n - min_gap - 1));
        std::sort(out.begin(), out.end());
        bool ok = true;
        for (std::size_t k = 1; k < out.size(); ++k) ok = ok && out[k] - out[k - 1] >= min_gap;
        if (ok) return out;
    }
}

}  // namespace structdecomp
