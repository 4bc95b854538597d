#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fbe {

// Every random object in the library draws from its own std::mt19937_64
// stream. Streams are keyed by a 64-bit seed; composite keys (seed, r, p, m,
// trial, ...) are folded into one seed with derive_seed so that independent
// work items never share or depend on a stream.
using RandomEngine = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

// Domain tags used when deriving sibling streams from one user seed.
namespace stream {
inline constexpr std::uint64_t kMatrix = 0x4d41545249580001ULL;
inline constexpr std::uint64_t kDiagonal = 0x4449414730000002ULL;
inline constexpr std::uint64_t kData = 0x4441544130000003ULL;
inline constexpr std::uint64_t kStability = 0x5354414230000004ULL;
}  // namespace stream

}  // namespace fbe
