#pragma once

#include "jenn/types.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace jenn {

// Thin wrapper over mt19937_64. The standard distributions are
// implementation-defined, so the derived draws are spelled out here to keep
// every seeded artifact identical across standard libraries.
class Rng {
  public:
    explicit Rng(Seed seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound). Rejection sampling, no modulo bias.
    std::size_t index(std::size_t bound);

    /// +1.0 or -1.0 with equal probability.
    double sign() { return (engine_() >> 63) != 0 ? -1.0 : 1.0; }

    /// Standard normal via Box-Muller.
    double normal();

    /// `count` distinct indices drawn uniformly from [0, population), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t population,
                                                        std::size_t count);

  private:
    std::mt19937_64 engine_;
};

inline std::size_t Rng::index(std::size_t bound) {
    const std::uint64_t range = bound;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t draw = engine_();
    while (draw >= limit) {
        draw = engine_();
    }
    return static_cast<std::size_t>(draw % range);
}

/// Independent child seed for a named stream (splitmix64 finalizer).
constexpr Seed derive_seed(Seed base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace jenn
