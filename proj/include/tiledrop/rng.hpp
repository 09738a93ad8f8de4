#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace tiledrop {

// SplitMix64 finalizer. Good avalanche; used both as a stream generator
// and to hash keys into seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Folds an ordered key tuple into one 64-bit seed. Order matters.
constexpr std::uint64_t hash_key(std::initializer_list<std::uint64_t> parts) noexcept
{
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (auto p : parts) {
        h = mix64(h ^ mix64(p));
    }
    return h;
}

// Counter-based generator satisfying UniformRandomBitGenerator. Cheap to
// construct, so every (seed, index...) key gets its own stream.
class KeyedRng {
public:
    using result_type = std::uint64_t;

    explicit constexpr KeyedRng(std::uint64_t seed) noexcept : state_(seed) {}
    KeyedRng(std::initializer_list<std::uint64_t> key) noexcept : state_(hash_key(key)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n > 0. Lemire-style rejection keeps it unbiased.
    std::uint64_t below(std::uint64_t n) noexcept
    {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = (*this)();
        } while (x >= limit);
        return x % n;
    }

private:
    std::uint64_t state_;
};

}  // namespace tiledrop
