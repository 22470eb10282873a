#pragma once

#include <cstdint>
#include <random>

namespace shapesr {

// splitmix64 step; used both as a generator and as a seed mixer.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Hash-combine an arbitrary list of integers into one seed. Streams derived
// from distinct tuples are independent for all practical purposes.
inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
    uint64_t s = 0x8f1bbcdcbfa53e0bULL;
    for (uint64_t p : parts) {
        s ^= p + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        splitmix64(s);
    }
    uint64_t st = s;
    return splitmix64(st);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::initializer_list<uint64_t> parts) {
    return Rng(mix_seed(parts));
}

}  // namespace shapesr
