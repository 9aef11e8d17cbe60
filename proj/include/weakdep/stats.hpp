#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace weakdep {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            carry_ += (sum_ - t) + x;
        else
            carry_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

inline double mean(std::span<const double> xs) {
    return xs.empty() ? 0.0 : compensated_sum(xs) / static_cast<double>(xs.size());
}

/// Unbiased sample variance (divides by n-1); 0 for fewer than two values.
inline double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    CompensatedSum s;
    for (double x : xs) s.add((x - m) * (x - m));
    return s.value() / static_cast<double>(xs.size() - 1);
}

/// An estimate together with its Monte Carlo standard error.
struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

/// Contiguous, near-equal batch boundaries: batch b covers [begin(b), begin(b+1)).
struct Batching {
    std::size_t total;
    std::size_t batches;
    std::size_t begin(std::size_t b) const { return b * total / batches; }
};

inline constexpr std::size_t kDefaultBatches = 20;

/// Standard error of a full-sample estimate from per-batch re-estimates.
inline double batch_standard_error(std::span<const double> batch_estimates) {
    const std::size_t b = batch_estimates.size();
    if (b < 2) return 0.0;
    return std::sqrt(sample_variance(batch_estimates) / static_cast<double>(b));
}

}  // namespace weakdep
