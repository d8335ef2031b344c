#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace specklegi {

/// Neumaier compensated accumulator. Used where large pixel sums feed
/// ratios that must stay stable under reordering (bucket sums, moments).
class KahanSum {
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

inline double mean_of(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean_of: empty range");
    KahanSum s;
    for (double x : v) s.add(x);
    return s.value() / static_cast<double>(v.size());
}

/// Sample standard deviation (n-1 denominator).
inline double sample_stddev(std::span<const double> v) {
    if (v.size() < 2) throw std::invalid_argument("sample_stddev: need at least 2 values");
    const double m = mean_of(v);
    KahanSum s;
    for (double x : v) s.add((x - m) * (x - m));
    return std::sqrt(s.value() / static_cast<double>(v.size() - 1));
}

/// Standard error of the mean of v.
inline double standard_error(std::span<const double> v) {
    return sample_stddev(v) / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace specklegi
