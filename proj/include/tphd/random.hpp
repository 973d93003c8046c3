#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tphd {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a over a label; used to give each random concern its own stream.
constexpr std::uint64_t label_hash(std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed of the stream for (`seed`, `label`, `index`). Run seeds are
/// master ^ run; each concern (truth, detection, noise, clutter, order)
/// then derives an independent stream per scan.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) {
    return mix64(mix64(seed ^ label_hash(label)) + index);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) {
    return std::mt19937_64(derive_seed(seed, label, index));
}

constexpr std::uint64_t run_seed(std::uint64_t master, std::uint64_t run) { return master ^ run; }

}  // namespace tphd
