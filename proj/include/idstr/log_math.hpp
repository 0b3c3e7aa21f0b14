#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace idstr {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) noexcept {
    if (a == kLogZero) return b;
    if (b == kLogZero) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

/// log(sum(exp(xs)))
inline double log_sum_exp(std::span<const double> xs) noexcept {
    double hi = kLogZero;
    for (double x : xs) hi = std::max(hi, x);
    if (hi == kLogZero) return kLogZero;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

/// beta * log(x) with the convention 0^0 = 1, i.e. beta == 0 yields 0 even for x == 0.
inline double pow_log(double beta, double log_x) noexcept {
    if (beta == 0.0) return 0.0;
    return beta * log_x;
}

inline double safe_log(double p) noexcept { return p > 0.0 ? std::log(p) : kLogZero; }

/// Converts log-domain scores to a probability vector summing to 1.
/// Returns false when every score is -inf.
inline bool normalize_log(std::span<const double> logs, std::span<double> out) noexcept {
    double z = log_sum_exp(logs);
    if (z == kLogZero) return false;
    for (std::size_t i = 0; i < logs.size(); ++i) out[i] = std::exp(logs[i] - z);
    return true;
}

} // namespace idstr
