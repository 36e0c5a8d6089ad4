#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pfgmpp {

using Engine = std::mt19937_64;

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Independent engine derived deterministically from a seed and a path of
/// indices, e.g. (seed, iteration, batch index) or (seed, chain).
inline Engine substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = detail::splitmix64(seed);
  for (std::uint64_t p : path) h = detail::splitmix64(h ^ detail::splitmix64(p + 0x632be59bd9b4e019ULL));
  return Engine(h);
}

inline double standard_normal(Engine& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double uniform01(Engine& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace pfgmpp
