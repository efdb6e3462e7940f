#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

// Self-contained deterministic random number generation. Every stochastic
// step in the pipeline derives its stream from an explicit 64-bit seed, so
// outputs are bit-reproducible across runs and worker counts (std::random
// distributions are implementation-defined and are not used anywhere).

namespace psog {

/// SplitMix64 finalizer: a single mixing step, usable as a hash.
constexpr std::uint64_t hash_mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Combines a seed with a list of coordinates into a new stream seed.
/// Used to give every (image, subject, grid point, ...) its own stream so
/// parallel schedules cannot change what gets drawn.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = hash_mix(seed);
  for (std::uint64_t c : coords) h = hash_mix(h ^ (c + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  return h;
}

/// xoshiro256++ stream generator, seeded via SplitMix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) {
      sm += 0x9e3779b97f4a7c15ULL;
      w = hash_mix(sm);
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t threshold = (0 - range) % range;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return lo + static_cast<std::int64_t>(r % range);
    }
  }

  /// Standard normal via Box-Muller (cosine branch only, no cached state).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_{};
};

/// Counter-based standard normal keyed by (seed, a, b). Stateless, so pixel
/// noise can be evaluated in any order (or in parallel) with identical
/// results.
inline double normal_at(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t h = derive_seed(seed, {a, b});
  const double u1 = 1.0 - static_cast<double>(hash_mix(h) >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(hash_mix(h + 1) >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace psog
