#pragma once

#include <cstdint>
#include <random>

namespace apnn {

// splitmix64; used to derive independent stream seeds from one run seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed + 0x632be59bd9b4e019ull * (stream + 1);
  return splitmix64(s);
}

// Uniform double in [0,1). Hand-rolled mapping so results do not depend on the
// standard library's distribution implementation.
inline double uniform01(std::mt19937_64& eng) {
  return double(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

}
