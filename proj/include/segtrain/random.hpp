#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace segtrain {

using Rng = std::mt19937_64;

/// Mixes a base seed with a string key (FNV-1a followed by a splitmix64 finalizer),
/// so per-document streams are stable regardless of processing order.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view key)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = h ^ (base + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31U);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt)
{
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31U);
}

} // namespace segtrain
