#pragma once

#include <cstdint>
#include <random>

namespace wetplan {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Seed for the (trial, device) substream of a master seed. Pure function,
/// so fading draws are identical no matter how trials are distributed over
/// worker threads.
inline std::uint64_t substream_seed(std::uint64_t master_seed, std::uint64_t trial,
                                    std::uint64_t device) {
  std::uint64_t s = detail::splitmix64(master_seed ^ 0x6a09e667f3bcc909ull);
  s = detail::splitmix64(s ^ (trial * 0x9e3779b97f4a7c15ull + 0xbb67ae8584caa73bull));
  s = detail::splitmix64(s ^ (device * 0xc2b2ae3d27d4eb4full + 0x3c6ef372fe94f82bull));
  return s;
}

inline std::mt19937_64 substream_engine(std::uint64_t master_seed, std::uint64_t trial,
                                        std::uint64_t device) {
  return std::mt19937_64(substream_seed(master_seed, trial, device));
}

}  // namespace wetplan
