// SPDX-License-Identifier: Apache-2.0
#include "seqdx/rng.hpp"

#include <cmath>
#include <limits>

namespace seqdx {

float Rng::normal(float mu, float sigma) {
    // Box-Muller, single-value form. u1 is kept away from 0 so log() is finite.
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = std::numeric_limits<double>::min();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
    return static_cast<float>(mu + sigma * z);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n <= 1) return 0;
    // Rejection sampling over the largest multiple of n representable in 64
    // bits, so every residue is equally likely.
    const std::uint64_t max64 = ~0ull;
    const std::uint64_t k = (max64 % n + 1) % n;  // 2^64 mod n
    std::uint64_t x = next_u64();
    if (k != 0) {
        const std::uint64_t reject_from = max64 - k + 1;  // accept x < 2^64 - k
        while (x >= reject_from) x = next_u64();
    }
    return x % n;
}

}  // namespace seqdx
