// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>

namespace fmtlab {

enum class GridOverflow { to_infinity, saturate };

// Round-to-nearest-even onto an FP grid with `mantissa_bits` stored bits,
// smallest normal 2^min_normal_exp and largest finite |value| max_finite.
// Values below the grid flush toward zero through the subnormal range.
inline double round_to_fp_grid(double x, int mantissa_bits, int min_normal_exp,
                               double max_finite,
                               GridOverflow overflow = GridOverflow::to_infinity) {
    if (x == 0.0 || !std::isfinite(x)) {
        if (std::isinf(x) && overflow == GridOverflow::saturate) {
            return std::copysign(max_finite, x);
        }
        return x;
    }
    int e = std::ilogb(x);
    if (e < min_normal_exp) e = min_normal_exp;
    const double quantum = std::ldexp(1.0, e - mantissa_bits);
    const double y = std::nearbyint(x / quantum) * quantum;
    if (std::fabs(y) > max_finite) {
        return overflow == GridOverflow::saturate
                   ? std::copysign(max_finite, x)
                   : std::copysign(std::numeric_limits<double>::infinity(), x);
    }
    return y;
}

} // namespace fmtlab
