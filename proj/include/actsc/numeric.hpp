#pragma once

#include <cmath>
#include <span>

namespace actsc {

/// Neumaier-compensated sum. The result depends only on the multiset of
/// inputs up to ~1 ulp of the total, not on accumulation order.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

/// Rounds to `decimals` places, half away from zero. Binary representation
/// noise below 1e-6 of the last kept digit is discarded first so that values
/// like -78.25000000000001 and -78.24999999999999 both round to -78.3.
inline double round_half_away(double x, int decimals) noexcept {
    const double scale = std::pow(10.0, decimals);
    double scaled = x * scale;
    scaled = std::round(scaled * 1e6) / 1e6;
    return std::round(scaled) / scale;
}

/// Logistic function clamped to the open interval (0, 1).
inline double sigmoid(double z) noexcept {
    double p;
    if (z >= 0) {
        p = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double e = std::exp(z);
        p = e / (1.0 + e);
    }
    constexpr double lo = 2.2250738585072014e-308;  // smallest normal
    constexpr double hi = 1.0 - 1.1102230246251565e-16;  // nextafter(1, 0)
    return p < lo ? lo : (p > hi ? hi : p);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) noexcept {
    return (z > 0 ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
}

} // namespace actsc
