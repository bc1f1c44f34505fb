#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace simex {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the substream addressed by (seed, ids...). Depends only on its
/// arguments, so draws never depend on scheduling order.
inline std::uint64_t substream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t id : ids) h = mix64(h ^ mix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

using Engine = std::mt19937_64;

inline Engine substream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  return Engine(substream_seed(seed, ids));
}

}  // namespace simex
