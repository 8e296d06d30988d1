#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mqe {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; a bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Labeled substream of a root seed ("noise", "init", "splits", ...).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label) noexcept {
    return mix64(root ^ mix64(fnv1a(label)));
}

// Per-item substream, e.g. one stream per node so adding nodes does not
// reshuffle the draws of existing ones.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
    return mix64(mix64(root) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace mqe
