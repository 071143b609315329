#pragma once

// Reference computations for the test suites. Everything here is written
// directly from the definitions (two-pass sums, explicit enumeration) and
// shares no code with the library paths it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

/// Σ (y − ȳ)² over [first, last], two-pass.
inline double sse(const std::vector<double>& y, std::size_t first, std::size_t last) {
    double mean = 0.0;
    for (std::size_t i = first; i <= last; ++i) mean += y[i];
    mean /= static_cast<double>(last - first + 1);
    double s = 0.0;
    for (std::size_t i = first; i <= last; ++i) s += (y[i] - mean) * (y[i] - mean);
    return s;
}

inline double objective(const std::vector<double>& y, const std::vector<std::size_t>& breaks, double beta) {
    double total = 0.0;
    std::size_t start = 0;
    for (std::size_t b : breaks) {
        total += sse(y, start, b);
        start = b + 1;
    }
    total += sse(y, start, y.size() - 1);
    return total + beta * static_cast<double>(breaks.size());
}

struct Best {
    std::vector<std::size_t> breaks;
    double objective = std::numeric_limits<double>::infinity();
};

/// Enumerates every admissible break set (each segment ≥ min_len). Exponential;
/// keep n small. Ties within `tie_tol` keep the lexicographically smallest set.
inline Best enumerate_partitions(const std::vector<double>& y, double beta, std::size_t min_len,
                                 double tie_tol = 1e-9) {
    Best best;
    const std::size_t n = y.size();
    std::vector<std::size_t> current;
    std::function<void(std::size_t)> rec = [&](std::size_t start) {
        // close the final segment here
        if (n - start >= min_len) {
            const double obj = objective(y, current, beta);
            if (obj < best.objective - tie_tol ||
                (std::abs(obj - best.objective) <= tie_tol && current < best.breaks)) {
                best.objective = std::min(obj, best.objective);
                best.breaks = current;
            }
        }
        for (std::size_t b = start + min_len - 1; b + min_len < n; ++b) {
            current.push_back(b);
            rec(b + 1);
            current.pop_back();
        }
    };
    rec(0);
    return best;
}

/// Quadratic DP with direct (two-pass) segment costs.
inline Best direct_dp(const std::vector<double>& y, double beta, std::size_t min_len) {
    const std::size_t n = y.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> F(n + 1, inf);
    std::vector<std::size_t> prev(n + 1, 0);
    F[0] = -beta;
    for (std::size_t t = min_len; t <= n; ++t) {
        for (std::size_t s = 0; s + min_len <= t; ++s) {
            if (F[s] == inf) continue;
            const double v = F[s] + sse(y, s, t - 1) + beta;
            if (v < F[t] - 1e-9) {
                F[t] = v;
                prev[t] = s;
            }
        }
    }
    Best out;
    for (std::size_t t = n; t > 0 && prev[t] > 0; t = prev[t]) out.breaks.push_back(prev[t] - 1);
    std::reverse(out.breaks.begin(), out.breaks.end());
    out.objective = objective(y, out.breaks, beta);
    return out;
}

/// Cost reduction of splitting [first, last] after b, direct sums.
inline double split_gain(const std::vector<double>& y, std::size_t first, std::size_t last, std::size_t b) {
    return sse(y, first, last) - sse(y, first, b) - sse(y, b + 1, last);
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Robust σ from first differences, sorted-vector medians.
inline double diff_sigma(const std::vector<double>& y) {
    std::vector<double> d;
    for (std::size_t i = 1; i < y.size(); ++i) d.push_back(y[i] - y[i - 1]);
    const double med = median_of(d);
    std::vector<double> dev;
    for (double v : d) dev.push_back(std::abs(v - med));
    return median_of(dev) / (std::sqrt(2.0) * 0.6745);
}

struct Line {
    double intercept;
    double slope;
};

inline Line ols_line(const std::vector<double>& y) {
    const double n = static_cast<double>(y.size());
    double mx = (n - 1.0) / 2.0;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sxy += (static_cast<double>(i) - mx) * (y[i] - my);
        sxx += (static_cast<double>(i) - mx) * (static_cast<double>(i) - mx);
    }
    const double slope = sxy / sxx;
    return {my - slope * mx, slope};
}

/// Dense Gaussian elimination for (I + λ D₂ᵀD₂) z = y.
inline std::vector<double> whittaker_dense(const std::vector<double>& y, double lambda) {
    const std::size_t n = y.size();
    std::vector<std::vector<double>> A(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        A[i][i] = 1.0;
        A[i][n] = y[i];
    }
    for (std::size_t r = 0; r + 2 < n; ++r) {
        const double c[3] = {1.0, -2.0, 1.0};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) A[r + a][r + b] += lambda * c[a] * c[b];
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        std::swap(A[col], A[piv]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = A[r][col] / A[col][col];
            for (std::size_t k = col; k <= n; ++k) A[r][k] -= f * A[col][k];
        }
    }
    std::vector<double> z(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = A[i][n];
        for (std::size_t k = i + 1; k < n; ++k) s -= A[i][k] * z[k];
        z[i] = s / A[i][i];
    }
    return z;
}

inline double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace oracle
