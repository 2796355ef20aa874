#pragma once

#include <cmath>
#include <cstdint>

namespace convbench {

// splitmix64. Weight init, batch shuffling and test noise all draw from this
// so results do not depend on the standard library's distribution
// implementations.
inline std::uint64_t next_u64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform in [0,1).
inline double next_unit(std::uint64_t& state) {
    return static_cast<double>(next_u64(state) >> 11) * 0x1.0p-53;
}

/// Uniform in [-bound, bound].
inline double next_uniform(std::uint64_t& state, double bound) {
    return (2.0 * next_unit(state) - 1.0) * bound;
}

/// Uniform integer in [0, n). Modulo bias is irrelevant at shuffle sizes.
inline std::uint64_t next_below(std::uint64_t& state, std::uint64_t n) {
    return next_u64(state) % n;
}

/// Standard normal via Box-Muller.
inline double next_normal(std::uint64_t& state) {
    double u1 = next_unit(state);
    while (u1 <= 0.0) {
        u1 = next_unit(state);
    }
    const double u2 = next_unit(state);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

} // namespace convbench
