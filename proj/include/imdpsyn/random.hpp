#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace imdpsyn {

// Counter-based deterministic random stream. Every variate is a pure function
// of (seed, stream tag, counter), so draws are reproducible bit-for-bit and
// independent of evaluation order. Uniform bits come from splitmix64 applied
// to a mixed key; normals use the Box-Muller transform (cosine branch only).

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Stream identity: seed plus a tag separating independent uses of one seed.
struct RandomStream {
    std::uint64_t key;

    RandomStream(std::uint64_t seed, std::uint64_t tag)
        : key(splitmix64(splitmix64(seed) ^ (tag * 0xD6E8FEB86659FD93ull))) {}

    std::uint64_t bits(std::uint64_t counter) const {
        return splitmix64(key ^ splitmix64(counter * 0xA3EC647659359ACDull + 0x12FADE34C9D10B2Full));
    }

    /// Uniform draw in (0, 1], never exactly zero.
    double uniform(std::uint64_t counter) const {
        return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal draw, one per counter.
    double normal(std::uint64_t counter) const {
        const double u1 = uniform(2 * counter);
        const double u2 = uniform(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
};

// Stream tags used across the toolkit.
inline constexpr std::uint64_t kTagScenarioSamples = 1;
inline constexpr std::uint64_t kTagSimulation = 2;
inline constexpr std::uint64_t kTagBootstrap = 3;

}  // namespace imdpsyn
