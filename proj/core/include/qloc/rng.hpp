#pragma once

// Seeded, replayable random streams. The generator is xoshiro256++ with
// splitmix64 state initialization; parallel streams are derived from
// (seed, stream index) so batches can be generated independently and merged
// deterministically. Gaussian variates use the cosine-branch Box-Muller
// transform. None of this depends on library-defined distributions, so
// replays are bit-exact across platforms and library versions.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qloc {

inline constexpr const char* kRngAlgorithm =
    "xoshiro256++/splitmix64/box-muller:v1";

struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

class Rng {
public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    SplitMix64 sm(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
    for (auto& w : s_) w = sm.next();
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on (0, 1]; never returns 0 so logs are safe.
  double uniform01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (uniform01() - 0x1.0p-53);
  }

  /// Standard normal via Box-Muller (cosine branch, one variate per call).
  double normal() {
    const double r = std::sqrt(-2.0 * std::log(uniform01()));
    return r * std::cos(2.0 * std::numbers::pi * uniform01());
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

}  // namespace qloc
