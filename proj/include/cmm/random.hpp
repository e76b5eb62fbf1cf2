#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cmm {

using Engine = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a root seed and a path of stream ids,
// e.g. derive_seed(seed, {kShuffleStream, epoch}).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(seed);
    for (std::uint64_t p : path) {
        s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    }
    return s;
}

inline Engine make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return Engine(derive_seed(seed, path));
}

} // namespace cmm
