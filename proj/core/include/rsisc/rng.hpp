#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rsisc {

using Rng = std::mt19937_64;

// SplitMix64 finalizer folded over the salts. Used to give every image,
// batch and epoch its own independent stream from one run seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> salts) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (std::uint64_t s : salts) h = mix(h ^ s);
  return h;
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t upper_inclusive) {
  return std::uniform_int_distribution<std::size_t>(0, upper_inclusive)(rng);
}

}  // namespace rsisc
