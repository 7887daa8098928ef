// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace seqdx {

/// Deterministic random source. Every random draw in the library flows from a
/// single root seed through named substreams, so single-threaded runs are
/// bit-reproducible and parallel producers can own independent streams.
///
/// The generator is splitmix64; substreams are derived from the *construction*
/// seed (not the current state), so `rng.stream(a, b)` yields the same stream
/// no matter how many values were drawn from `rng` before the call.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    /// Derived substream, independent of this stream's draw position.
    Rng stream(std::uint64_t a, std::uint64_t b = 0) const {
        std::uint64_t s = mix(seed_ ^ mix(a ^ 0x9E3779B97F4A7C15ull));
        s = mix(s ^ mix(b ^ 0x632BE59BD9B4E019ull));
        return Rng(s);
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix_raw(state_);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform float in [lo, hi). Requires lo <= hi; returns lo when lo == hi.
    float uniform(float lo, float hi) {
        return static_cast<float>(lo + (static_cast<double>(hi) - lo) * next_double());
    }

    /// Normal(mu, sigma) via Box-Muller (one value per two uniform draws).
    float normal(float mu, float sigma);

    /// Unbiased uniform integer in [0, n). Requires n >= 1.
    std::uint64_t below(std::uint64_t n);

    /// Fisher-Yates shuffle (uniform over permutations).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t seed() const { return seed_; }

private:
    static std::uint64_t mix_raw(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t mix(std::uint64_t z) {
        return mix_raw(z + 0x9E3779B97F4A7C15ull);
    }

    std::uint64_t seed_;
    std::uint64_t state_;
};

/// Stream ids used to derive named substreams from a root seed. Kept in one
/// place so the substream layout is documented and stable.
namespace streams {
inline constexpr std::uint64_t kParamInit = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kAugment = 4;
inline constexpr std::uint64_t kSynth = 5;
}  // namespace streams

}  // namespace seqdx
