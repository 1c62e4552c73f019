#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "../constants.hpp"

namespace muxmem::detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Key for substream `index` of stream `seed`; distinct (seed, index) pairs give
/// statistically independent substreams.
inline constexpr std::uint64_t substream_key(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed) ^ (index * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

/// xoshiro256** seeded from a substream key. Satisfies UniformRandomBitGenerator.
///
/// All variates are produced by explicit transforms below rather than the
/// <random> distributions, so sampled values are identical across standard
/// library implementations.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key) noexcept {
    for (auto& s : state_) {
      key = splitmix64(key);
      s = key;
    }
  }

  Stream(std::uint64_t seed, std::uint64_t index) noexcept : Stream(substream_key(seed, index)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double uniform_open_zero() noexcept { return 1.0 - uniform(); }

  bool bernoulli(double probability) noexcept { return uniform() < probability; }

  /// Box-Muller; one call per variate.
  double normal(double mean, double sigma) noexcept {
    const double u1 = uniform_open_zero();
    const double u2 = uniform();
    return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(constants::two_pi * u2);
  }

  /// Bose-Einstein (geometric) photon number with the given mean.
  std::uint64_t thermal(double mean) noexcept {
    if (mean <= 0.0) return 0;
    const double ratio = mean / (1.0 + mean);
    const double n = std::floor(std::log(uniform_open_zero()) / std::log(ratio));
    return static_cast<std::uint64_t>(n);
  }

  /// Number of successes in n trials; n is small here (photon numbers).
  std::uint64_t binomial(std::uint64_t n, double probability) noexcept {
    std::uint64_t k = 0;
    for (std::uint64_t i = 0; i < n; ++i) k += bernoulli(probability) ? 1 : 0;
    return k;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4]{};
};

}  // namespace muxmem::detail
