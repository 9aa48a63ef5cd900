#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace bdpo {

// Deterministic RNG helpers. The mt19937_64 engine is bit-exact by the
// standard; the std:: distributions are not, so every mapping from raw
// 64-bit draws to values is spelled out here. Same seed, same sequence,
// on any platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [0, n). 128-bit multiply-shift; bias is < n * 2^-64.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    // Uniform in (-scale, scale).
    double symmetric(double scale) { return (2.0 * next_unit() - 1.0) * scale; }

    // In-place Fisher-Yates.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // splitmix64 finalizer; used to derive per-epoch shuffle seeds.
    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace bdpo
