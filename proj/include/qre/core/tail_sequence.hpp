#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qre/core/matrix.hpp"

namespace qre {

using Level = std::size_t;

namespace detail {
inline double scale_value(double v, double s) { return v * s; }
inline Matrix scale_value(const Matrix& v, double s) { return v.scaled(s); }
}  // namespace detail

// A level-indexed family x(0), x(1), ... given by a finite prefix followed by
// an eventually periodic tail:
//
//   x(n) = prefix[n]                                      for n <  N0
//   x(n) = tail[(n - N0) mod p] * (1 + growth * (n - N0))  for n >= N0
//
// growth = 0 is the plain periodic tail. A positive growth gives the linearly
// scaled families such as v_n(0,1) = eta * (n + 1).
template <class T>
class TailSequence {
public:
    TailSequence() = default;

    TailSequence(std::vector<T> prefix, std::vector<T> tail, double growth = 0.0)
        : prefix_(std::move(prefix)), tail_(std::move(tail)), growth_(growth) {
        if (tail_.empty()) throw std::invalid_argument("TailSequence: tail must be non-empty");
        if (growth_ < 0.0) throw std::invalid_argument("TailSequence: growth must be >= 0");
    }

    static TailSequence constant(T value) { return TailSequence({}, {std::move(value)}); }

    Level tail_start() const { return prefix_.size(); }
    std::size_t period() const { return tail_.size(); }
    double growth() const { return growth_; }
    const std::vector<T>& prefix() const { return prefix_; }
    const std::vector<T>& tail() const { return tail_; }

    // Unscaled entry; equals at(n) whenever scale(n) == 1.
    const T& base(Level n) const {
        if (n < prefix_.size()) return prefix_[n];
        return tail_[(n - prefix_.size()) % tail_.size()];
    }

    double scale(Level n) const {
        if (n < prefix_.size() || growth_ == 0.0) return 1.0;
        return 1.0 + growth_ * static_cast<double>(n - prefix_.size());
    }

    T at(Level n) const {
        const double s = scale(n);
        if (s == 1.0) return base(n);
        return detail::scale_value(base(n), s);
    }

    // Every stored entry, prefix first.
    template <class F>
    void for_each_stored(F&& f) const {
        for (std::size_t i = 0; i < prefix_.size(); ++i) f(i, prefix_[i], false);
        for (std::size_t i = 0; i < tail_.size(); ++i) f(i, tail_[i], true);
    }

private:
    std::vector<T> prefix_;
    std::vector<T> tail_;
    double growth_ = 0.0;
};

inline std::size_t lcm_period(std::size_t a, std::size_t b) { return std::lcm(a, b); }

}  // namespace qre
