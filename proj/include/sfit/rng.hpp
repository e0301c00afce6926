#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sfit {

// splitmix64 step; used to derive independent child seeds from a root seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Child seed for a named purpose ("train", "split", ...) plus an index
// (trial number, model number). Children of distinct (purpose, index)
// pairs are independent streams of the same root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose,
                                 std::uint64_t index = 0) {
    return splitmix64(root ^ fnv1a64(purpose) ^ splitmix64(index + 0x51ed2701));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace sfit
