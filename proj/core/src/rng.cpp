#include "nasf/rng.hpp"

#include <cmath>

namespace nasf {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) {
        w = splitmix64(s);
    }
}

std::uint64_t Rng::next_u64() {
    // xoshiro256** 1.0
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

int Rng::uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
    // Rejection sampling on the top of the range to remove modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return lo + static_cast<int>(v % span);
}

double Rng::uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_real(double lo, double hi) {
    return lo + (hi - lo) * uniform_real();
}

double Rng::normal() {
    // Box-Muller; u clamped away from 0 so log() stays finite.
    double u = uniform_real();
    double v = uniform_real();
    if (u <= 0.0) {
        u = 0x1.0p-53;
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u)) * std::cos(two_pi * v);
}

std::uint64_t Rng::mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64(s);
    s ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return splitmix64(s);
}

std::uint64_t Rng::mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix(mix(a, b), c);
}

} // namespace nasf
