#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

// Counter-style random source built on SplitMix64. Every consumer derives its
// own stream from (seed, context words), so results never depend on call
// order, thread count, or platform. The full construction is:
//
//   mix64(z)         = SplitMix64 output function applied to z + golden gamma
//   derive(s, w...)  = fold: s <- mix64(s ^ w) for each word w
//   Stream::next_u64 = SplitMix64 sequence from the derived state
//   uniform          = ((u64 >> 11) + 0.5) * 2^-53, strictly inside (0, 1)
//   normal           = Box-Muller, cosine branch only, from two uniforms
//   gumbel           = -log(-log(uniform))
//
// Any implementation in any language that follows these formulas reproduces
// the same doubles bit-for-bit.

namespace soint::rng {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z += kGamma;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// FNV-1a, used to absorb string labels into stream derivations.
inline std::uint64_t hash_str(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t derive(std::uint64_t seed,
                            std::initializer_list<std::uint64_t> words) {
    std::uint64_t s = seed;
    for (std::uint64_t w : words) s = mix64(s ^ w);
    return s;
}

class Stream {
public:
    explicit Stream(std::uint64_t state) : state_(state) {}

    std::uint64_t next_u64() {
        state_ += kGamma;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Strictly inside (0,1); safe under log().
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double gumbel() { return -std::log(-std::log(uniform())); }

private:
    std::uint64_t state_;
};

inline Stream stream(std::uint64_t seed,
                     std::initializer_list<std::uint64_t> words) {
    return Stream(derive(seed, words));
}

}  // namespace soint::rng
