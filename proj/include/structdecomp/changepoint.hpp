#pragma once

#include "core.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace structdecomp {

/// Gaussian change-in-mean cost with O(1) segment evaluation from prefix sums.
///
/// Values are shifted by their global mean before accumulation; the cost is
/// shift invariant and the shift keeps Σy² − (Σy)²/m well conditioned.
class GaussianMeanCost {
public:
    explicit GaussianMeanCost(std::span<const double> values) : sum_(values.size() + 1), sum_sq_(values.size() + 1) {
        const double shift =
            values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double v = values[i] - shift;
            sum_[i + 1] = sum_[i] + v;
            sum_sq_[i + 1] = sum_sq_[i] + v * v;
        }
    }

    std::size_t size() const noexcept { return sum_.size() - 1; }

    /// Cost of samples [first, last] (inclusive).
    double segment_cost(std::size_t first, std::size_t last) const noexcept { return cost_between(first, last + 1); }

    /// Cost of samples [begin, end) in prefix coordinates.
    double cost_between(std::size_t begin, std::size_t end) const noexcept {
        const double m = static_cast<double>(end - begin);
        const double s = sum_[end] - sum_[begin];
        const double ss = sum_sq_[end] - sum_sq_[begin];
        return std::max(0.0, ss - s * s / m);
    }

private:
    std::vector<double> sum_;
    std::vector<double> sum_sq_;
};

/// β = 2 σ̂² ln n with σ̂ from first differences; ln n when σ̂ is zero.
inline double resolve_penalty(const PenaltyPolicy& policy, std::span<const double> values) {
    if (policy.mode == PenaltyPolicy::Mode::fixed) return policy.value;
    const double n = static_cast<double>(values.size());
    const double sigma = robust_sigma_from_differences(values);
    if (sigma == 0.0) return std::log(n);
    return 2.0 * sigma * sigma * std::log(n);
}

/// Penalized segmentation objective for a given break set: Σ segment cost + β·#breaks.
inline double segmentation_objective(const GaussianMeanCost& cost, const ChangepointSet& changepoints, double beta) {
    double total = 0.0;
    for (const Segment& seg : segments_from(changepoints)) total += cost.segment_cost(seg.start, seg.end);
    return total + beta * static_cast<double>(changepoints.breaks().size());
}

/// Break set together with the optimal objective value reached by the solver.
struct Partition {
    ChangepointSet changepoints;
    double objective = 0.0;
    double penalty = 0.0;
};

namespace detail {

inline void require_length(std::size_t n, std::size_t min_segment_length) {
    if (min_segment_length < 1) throw Error(ErrorCode::InvalidConfig, "min_segment_length must be positive");
    if (n < 2 * min_segment_length) {
        throw Error(ErrorCode::SeriesTooShort, "need at least " + std::to_string(2 * min_segment_length) +
                                                   " samples, got " + std::to_string(n));
    }
}

inline ChangepointSet backtrack(const std::vector<std::size_t>& last_change, std::size_t n) {
    std::vector<std::size_t> breaks;
    std::size_t t = n;
    while (t > 0) {
        const std::size_t s = last_change[t];
        if (s == 0) break;
        breaks.push_back(s - 1);
        t = s;
    }
    std::reverse(breaks.begin(), breaks.end());
    return ChangepointSet(n, std::move(breaks));
}

}  // namespace detail

/// Exact optimal partitioning with PELT pruning.
///
/// F(t) = min_s F(s) + C(s, t] + β over admissible s (t − s ≥ min length),
/// F(0) = −β. A candidate s with F(s) + C(s, t] > F(t) can never beat t as a
/// last split for any t' ≥ t + min length, so it is dropped from that point on.
/// Ties go to the smallest split index.
inline Partition optimal_partition_pelt(std::span<const double> values, const PenaltyPolicy& penalty,
                                        std::size_t min_segment_length) {
    const std::size_t n = values.size();
    detail::require_length(n, min_segment_length);
    const std::size_t m = min_segment_length;
    const double beta = resolve_penalty(penalty, values);
    const GaussianMeanCost cost(values);
    constexpr double inf = std::numeric_limits<double>::infinity();
    constexpr std::size_t never = std::numeric_limits<std::size_t>::max();

    std::vector<double> F(n + 1, inf);
    std::vector<std::size_t> last_change(n + 1, 0);
    std::vector<std::size_t> pruned_from(n + 1, never);
    F[0] = -beta;

    std::vector<std::size_t> candidates{0};
    std::vector<std::size_t> kept;
    candidates.reserve(64);
    kept.reserve(64);

    for (std::size_t t = m; t <= n; ++t) {
        const std::size_t fresh = t - m;
        if (fresh > 0 && F[fresh] < inf) candidates.push_back(fresh);

        kept.clear();
        for (std::size_t s : candidates)
            if (pruned_from[s] > t) kept.push_back(s);
        candidates.swap(kept);

        double best = inf;
        std::size_t arg = 0;
        for (std::size_t s : candidates) {
            const double v = F[s] + cost.cost_between(s, t) + beta;
            if (v < best) {
                best = v;
                arg = s;
            }
        }
        F[t] = best;
        last_change[t] = arg;

        if (t + m <= n) {
            for (std::size_t s : candidates) {
                if (F[s] + cost.cost_between(s, t) > F[t]) pruned_from[s] = std::min(pruned_from[s], t + m);
            }
        }
    }
    return {detail::backtrack(last_change, n), F[n], beta};
}

inline ChangepointSet detect_pelt(const TimeSeries& series, const PenaltyPolicy& penalty,
                                  std::size_t min_segment_length = 10) {
    return optimal_partition_pelt(series.values(), penalty, min_segment_length).changepoints;
}

inline constexpr std::size_t kOracleMaxLength = 2000;

/// Unpruned O(n²) dynamic program over every admissible segmentation.
/// Same objective and tie rule as PELT; used as its reference.
inline Partition exhaustive_optimal_partition(std::span<const double> values, const PenaltyPolicy& penalty,
                                              std::size_t min_segment_length) {
    const std::size_t n = values.size();
    if (n > kOracleMaxLength) {
        throw Error(ErrorCode::OracleSizeExceeded, "exhaustive search limited to " + std::to_string(kOracleMaxLength) +
                                                       " samples");
    }
    detail::require_length(n, min_segment_length);
    const std::size_t m = min_segment_length;
    const double beta = resolve_penalty(penalty, values);
    const GaussianMeanCost cost(values);
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<double> F(n + 1, inf);
    std::vector<std::size_t> last_change(n + 1, 0);
    F[0] = -beta;
    for (std::size_t t = m; t <= n; ++t) {
        double best = inf;
        std::size_t arg = 0;
        for (std::size_t s = 0; s + m <= t; ++s) {
            if (F[s] == inf) continue;
            const double v = F[s] + cost.cost_between(s, t) + beta;
            if (v < best) {
                best = v;
                arg = s;
            }
        }
        F[t] = best;
        last_change[t] = arg;
    }
    return {detail::backtrack(last_change, n), F[n], beta};
}

inline ChangepointSet exhaustive_optimal_partition(const TimeSeries& series, const PenaltyPolicy& penalty,
                                                   std::size_t min_segment_length = 10) {
    return exhaustive_optimal_partition(series.values(), penalty, min_segment_length).changepoints;
}

/// Best admissible split of [first, last] by cost reduction; smallest index on ties.
struct SplitCandidate {
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t split = 0;  // last index of the left part
    double gain = -std::numeric_limits<double>::infinity();
};

inline SplitCandidate best_split(const GaussianMeanCost& cost, std::size_t first, std::size_t last,
                                 std::size_t min_segment_length) {
    SplitCandidate out{first, last, first, -std::numeric_limits<double>::infinity()};
    const std::size_t len = last - first + 1;
    if (len < 2 * min_segment_length) return out;
    const double whole = cost.segment_cost(first, last);
    for (std::size_t b = first + min_segment_length - 1; b + min_segment_length <= last; ++b) {
        const double gain = whole - cost.segment_cost(first, b) - cost.segment_cost(b + 1, last);
        if (gain > out.gain) {
            out.gain = gain;
            out.split = b;
        }
    }
    return out;
}

/// Binary segmentation. Splits are taken best-first across all open segments
/// while the cost reduction exceeds β and fewer than `max_breaks` are placed.
inline ChangepointSet detect_binseg(std::span<const double> values, const PenaltyPolicy& penalty,
                                    std::size_t min_segment_length, std::size_t max_breaks) {
    const std::size_t n = values.size();
    detail::require_length(n, min_segment_length);
    const double beta = resolve_penalty(penalty, values);
    const GaussianMeanCost cost(values);

    std::vector<SplitCandidate> open{best_split(cost, 0, n - 1, min_segment_length)};
    std::vector<std::size_t> breaks;
    while (breaks.size() < max_breaks && !open.empty()) {
        auto top = open.begin();
        for (auto it = open.begin(); it != open.end(); ++it)
            if (it->gain > top->gain) top = it;
        if (!(top->gain > beta)) break;
        const SplitCandidate chosen = *top;
        open.erase(top);
        breaks.push_back(chosen.split);
        open.push_back(best_split(cost, chosen.first, chosen.split, min_segment_length));
        open.push_back(best_split(cost, chosen.split + 1, chosen.last, min_segment_length));
        // keep open segments ordered by position so gain ties resolve to the leftmost split
        std::sort(open.begin(), open.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    }
    std::sort(breaks.begin(), breaks.end());
    return ChangepointSet(n, std::move(breaks));
}

inline ChangepointSet detect_binseg(const TimeSeries& series, const PenaltyPolicy& penalty,
                                    std::size_t min_segment_length = 10,
                                    std::size_t max_breaks = std::numeric_limits<std::size_t>::max()) {
    return detect_binseg(series.values(), penalty, min_segment_length, max_breaks);
}

/// Noise scale used by the CUSUM test: robust σ̂ from differences, falling back
/// to the scaled mean absolute deviation of the differences when the MAD is 0.
inline double cusum_scale(std::span<const double> values) {
    const double sigma = robust_sigma_from_differences(values);
    if (sigma > 0.0 || values.size() < 2) return sigma;
    std::vector<double> diffs(values.size() - 1);
    for (std::size_t i = 1; i < values.size(); ++i) diffs[i - 1] = values[i] - values[i - 1];
    return kMeanAbsDevConsistency * mean_abs_deviation_from_median(diffs) / std::sqrt(2.0);
}

/// Normalized CUSUM statistic of one segment, maximized over admissible split
/// positions. `split` is the last index (relative to the segment) of the left part.
struct CusumStatistic {
    double q = 0.0;
    std::size_t split = 0;
};

inline CusumStatistic cusum_statistic(std::span<const double> segment, std::size_t min_segment_length) {
    const std::size_t m = segment.size();
    CusumStatistic out;
    if (m < 2 * min_segment_length) return out;
    const auto [lo, hi] = std::minmax_element(segment.begin(), segment.end());
    if (*lo == *hi) return out;

    const double mean = std::accumulate(segment.begin(), segment.end(), 0.0) / static_cast<double>(m);
    double partial = 0.0;
    double best = -1.0;
    for (std::size_t k = 1; k < m; ++k) {
        partial += segment[k - 1] - mean;
        if (k < min_segment_length || m - k < min_segment_length) continue;
        if (std::abs(partial) > best) {
            best = std::abs(partial);
            out.split = k - 1;
        }
    }
    const double sigma = cusum_scale(segment);
    out.q = sigma > 0.0 ? best / (sigma * std::sqrt(static_cast<double>(m))) : std::numeric_limits<double>::infinity();
    return out;
}

/// Recursive CUSUM segmentation: split at the argmax whenever Q exceeds the critical value.
inline ChangepointSet detect_cusum(std::span<const double> values, double critical_value,
                                   std::size_t min_segment_length) {
    const std::size_t n = values.size();
    detail::require_length(n, min_segment_length);
    if (!(critical_value > 0.0)) throw Error(ErrorCode::InvalidConfig, "critical value must be positive");

    std::vector<std::size_t> breaks;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n - 1}};
    while (!stack.empty()) {
        const auto [first, last] = stack.back();
        stack.pop_back();
        const auto stat = cusum_statistic(values.subspan(first, last - first + 1), min_segment_length);
        if (!(stat.q > critical_value)) continue;
        const std::size_t b = first + stat.split;
        breaks.push_back(b);
        stack.emplace_back(first, b);
        stack.emplace_back(b + 1, last);
    }
    std::sort(breaks.begin(), breaks.end());
    return ChangepointSet(n, std::move(breaks));
}

inline ChangepointSet detect_cusum(const TimeSeries& series, double critical_value = kDefaultCusumCritical,
                                   std::size_t min_segment_length = 10) {
    return detect_cusum(series.values(), critical_value, min_segment_length);
}

}  // namespace structdecomp
