// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <random>

namespace tenfactor {

/// splitmix64 finalizer (Steele, Lea, Flood 2014).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives an independent 64-bit seed for stream `stream` of a master seed.
/// Streams are stable across thread counts: work item i always uses stream i.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream * 0xD1342543DE82EF95ULL + 1));
}

/// Counter-based stream: engine seeded from (seed, stream), independent of
/// any other stream of the same master seed.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(derive_stream(seed, stream));
}

}  // namespace tenfactor
