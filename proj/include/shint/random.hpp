#pragma once

// Counter-based generator: draw n (1-based) of stream `seed` is splitmix64(seed + n * 0x9E3779B97F4A7C15).
// Every derived variate consumes a fixed, documented number of raw draws, so sequences are
// reproducible bit-for-bit across platforms and can be re-implemented in other languages.
//
//   uniform01()        1 draw: (u >> 11) * 2^-53, in [0, 1)
//   uniform(a, b)      1 draw: a + (b - a) * uniform01()
//   uniform_int(a, b)  >= 1 draws: rejection sampling on u, inclusive [a, b]
//   normal()           2 draws: Box-Muller, cosine branch

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "shint/error.hpp"

namespace shint {

inline constexpr std::uint64_t splitmix64_gamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

    std::uint64_t next_u64() { return splitmix64_mix(seed_ + (++counter_) * splitmix64_gamma); }

    /// Stateless access to draw n of the stream.
    static std::uint64_t at(std::uint64_t seed, std::uint64_t n) { return splitmix64_mix(seed + n * splitmix64_gamma); }

    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (lo > hi)
            throw ValueError("uniform_int: empty range");
        const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
        if (range == 0) // full 64-bit span
            return static_cast<std::int64_t>(next_u64());
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    (std::numeric_limits<std::uint64_t>::max() % range + 1) % range;
        std::uint64_t u;
        do {
            u = next_u64();
        } while (u > limit);
        return lo + static_cast<std::int64_t>(u % range);
    }

    double normal() {
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

} // namespace shint
