#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace fgps {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed of an independent sub-stream identified by `path`. Work item i of a
// parallel loop draws from derive_seed(seed, {tag, i}), so results do not
// depend on how items are scheduled across threads.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(seed);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

inline void fill_standard_normal(Rng& rng, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out) v = normal(rng);
}

// Stream tags used by derive_seed across the library.
namespace stream {
inline constexpr std::uint64_t kPriorRow = 1;
inline constexpr std::uint64_t kMeasurement = 2;
inline constexpr std::uint64_t kForwardNoise = 3;
inline constexpr std::uint64_t kSampler = 4;
inline constexpr std::uint64_t kTrial = 5;
inline constexpr std::uint64_t kMonteCarlo = 6;
}  // namespace stream

}  // namespace fgps
