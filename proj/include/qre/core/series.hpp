#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "qre/core/tail_sequence.hpp"

namespace qre {

struct SeriesSum {
    bool converges = false;
    double sum = std::numeric_limits<double>::infinity();
    double error_bound = 0.0;  // 0 for exact periodic tails
    double tail_ratio = 0.0;   // product of term ratios over one period (limit when growing)
};

/// Sum of t(0) + t(1) + ... with t(0) = 1 and t(n+1) = t(n) * ratio(n), where
/// ratio(n) is periodic with `period` for n >= tail_start.
///
/// With `growing` set the ratio on each residue class is instead a quotient of
/// affine functions of n (monotone), so its supremum over a class ray is the
/// larger of its value at the ray start and its limit. The limit is read off
/// far out on the ray.
template <class Ratio>
SeriesSum sum_ratio_series(Ratio ratio, Level tail_start, std::size_t period, bool growing,
                           double rel_tol = 1e-16, double margin = 1e-12) {
    SeriesSum out;
    const double far = static_cast<double>(period) * 1073741824.0;  // 2^30 periods out
    auto far_ratio = [&](Level n) { return ratio(static_cast<Level>(static_cast<double>(n) + far)); };

    double rho = 1.0;
    for (std::size_t j = 0; j < period; ++j) rho *= growing ? far_ratio(tail_start + j) : ratio(tail_start + j);
    out.tail_ratio = rho;
    if (!(rho < 1.0 - margin)) return out;

    double partial = 0.0;
    double term = 1.0;
    Level n = 0;
    for (; n < tail_start; ++n) {
        partial += term;
        term *= ratio(n);
    }

    if (!growing) {
        double block = 0.0, t = 1.0;
        for (std::size_t j = 0; j < period; ++j) {
            block += t;
            t *= ratio(tail_start + j);
        }
        out.converges = true;
        out.sum = partial + term * block / (1.0 - rho);
        return out;
    }

    constexpr std::size_t kMaxBlocks = 10'000'000;
    for (std::size_t blocks = 0; blocks < kMaxBlocks; ++blocks) {
        double upper = 1.0, block = 0.0;
        for (std::size_t j = 0; j < period; ++j) {
            block += upper;
            upper *= std::max(ratio(n + j), far_ratio(n + j));
        }
        if (upper < 1.0) {
            const double bound = term * block / (1.0 - upper);
            if (bound <= rel_tol * partial || term == 0.0) {
                out.converges = true;
                out.sum = partial + 0.5 * bound;
                out.error_bound = 0.5 * bound;
                return out;
            }
        }
        for (std::size_t j = 0; j < period; ++j, ++n) {
            partial += term;
            term *= ratio(n);
        }
    }
    return out;
}

}  // namespace qre
