#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace swqif {

// SplitMix64 finalizer; used to derive independent stream seeds from keys.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t k : key) h = splitmix64(h ^ splitmix64(k));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_stream(std::initializer_list<std::uint64_t> key) { return Rng(derive_seed(key)); }

}  // namespace swqif
