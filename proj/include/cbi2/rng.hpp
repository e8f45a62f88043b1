#pragma once

#include <cstdint>
#include <random>

namespace cbi2 {

using Engine = std::mt19937_64;

/// SplitMix64 output function; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of replicate stream `index` under run seed `seed`:
///   splitmix64(seed ^ splitmix64(index)).
/// Distinct indices give decorrelated streams; the mapping is stable across
/// platforms and releases.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(seed ^ splitmix64(index));
}

inline Engine make_engine(std::uint64_t seed) { return Engine(splitmix64(seed)); }

}  // namespace cbi2
