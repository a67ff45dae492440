#pragma once

// Random streams used across the library.
//
// Generator: std::mt19937_64, whose output sequence is fixed by the C++
// standard and therefore identical on every conforming platform.
// Substreams: the seed of stream (seed, index) is
//     splitmix64(splitmix64(seed) ^ splitmix64(index + 0x9E3779B97F4A7C15)).
// Uniform reals take the top 53 bits of one 64-bit draw: u = (x >> 11) * 2^-53,
// so u lies in [0, 1). No std::*_distribution is used because their outputs
// are implementation-defined.

#include <cstdint>
#include <random>

namespace wordorder {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x9E3779B97F4A7C15ULL));
}

class Rng {
public:
    static constexpr const char* kAlgorithm = "mt19937_64+splitmix64-substreams";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for (seed, index), e.g. one per sentence length.
    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        return Rng(substream_seed(seed, index));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). Lemire-style rejection keeps it unbiased.
    std::uint64_t below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = (0 - bound) % bound;  // 2^64 mod bound
        for (;;) {
            const std::uint64_t x = engine_();
            const unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
            if (static_cast<std::uint64_t>(m) >= limit) return static_cast<std::uint64_t>(m >> 64);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace wordorder
