#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sbm {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based stream split. The seed of stream (tag, index) depends only on
/// (master, tag, index), so trial i draws the same numbers whatever the thread
/// count or scheduling order.
///
///   derive_seed(m, t, i) = mix64(mix64(m ^ mix64(t)) + i)
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                    std::uint64_t index = 0) {
  return mix64(mix64(master ^ mix64(tag)) + index);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t tag,
                    std::uint64_t index = 0) {
  return Rng{derive_seed(master, tag, index)};
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Fair +1/-1.
inline int coin_sign(Rng& rng) { return (rng() >> 63) ? 1 : -1; }

inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

/// Poisson(mean). Sequential inversion for mean < 10 (exact up to rounding of
/// the cumulative sum); the library's rejection sampler above that.
inline std::int64_t poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  if (mean < 10.0) {
    const double u = uniform01(rng);
    double p = std::exp(-mean);
    double cdf = p;
    std::int64_t k = 0;
    while (u >= cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      const double next = cdf + p;
      if (next == cdf) break;  // tail exhausted in double precision
      cdf = next;
    }
    return k;
  }
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

/// Seed tags for the independent parts of an experiment.
namespace stream {
inline constexpr std::uint64_t kTree = 1;
inline constexpr std::uint64_t kBroadcast = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kCoin = 4;
inline constexpr std::uint64_t kGraph = 5;
inline constexpr std::uint64_t kHoldout = 6;
inline constexpr std::uint64_t kBlackBox = 7;
inline constexpr std::uint64_t kPopulation = 8;
inline constexpr std::uint64_t kTrial = 9;
inline constexpr std::uint64_t kVertex = 10;
}  // namespace stream

}  // namespace sbm
