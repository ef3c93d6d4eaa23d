#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace nasf {

/// Seedable, portable pseudo-random generator: xoshiro256** seeded through
/// splitmix64. The full algorithm lives in this repository, so identical
/// seeds produce identical streams on every platform and toolchain. All
/// randomness in the framework (weight init, sampling, GA operators) goes
/// through this class; standard-library distributions are avoided because
/// their output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform integer in [lo, hi], inclusive. Uses rejection sampling, so
    /// the result is exactly uniform and reproducible.
    int uniform_int(int lo, int hi);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform_real();

    /// Uniform double in [lo, hi).
    double uniform_real(double lo, double hi);

    /// Standard normal via Box-Muller (deterministic, no cached spare).
    double normal();

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(
                uniform_int(0, static_cast<int>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Mixes several seed components into one 64-bit seed (splitmix64 over
    /// the concatenation). Used to derive per-epoch / per-rank streams.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b);
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c);

private:
    std::array<std::uint64_t, 4> state_;
};

} // namespace nasf
