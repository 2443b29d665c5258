#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace csgd {

/// Seeded generator with a platform-stable uniform draw.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform double in [0, 1) built from the top 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n) {
        auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finalizer; maps (master seed, stream id) to an independent stream seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Well-known stream ids so every consumer of the master seed is reproducible.
namespace streams {
inline constexpr std::uint64_t trajectory = 1;
inline constexpr std::uint64_t sampler = 2;
inline constexpr std::uint64_t noise = 3;
}  // namespace streams

}  // namespace csgd
