#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mixboot {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; decorrelates nearby integer seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed for stream `index` under `root`. This is the only seed-splitting rule in
// the library: replicate k, EM restart k, etc. all use derive_seed(root, k), so
// results never depend on scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
  return splitmix64(root ^ splitmix64(index + 1));
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Draws index j with probability weights[j] / sum(weights). Consumes exactly one
// uniform variate.
inline std::size_t sample_index(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] <= 0.0) continue;
    acc += weights[j];
    last_positive = j;
    if (u < acc) return j;
  }
  return last_positive;
}

}  // namespace mixboot
