#pragma once

#include <cstdint>
#include <initializer_list>

namespace abrac {

/// Counter-based pseudo-random stream (splitmix64 core). Identical seeds give
/// bit-identical draw sequences on every platform, which is what makes whole
/// experiment runs reproducible from a single master seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform double in [lo, hi). Requires lo < hi.
  double uniform(double lo, double hi);
  /// Uniform double in [0, 1).
  double uniform01();
  /// Normal draw via Box-Muller. std == 0 returns mean exactly without
  /// consuming state. Requires std >= 0.
  double normal(double mean, double std);
  /// Uniform integer in [lo, hi], both inclusive. Unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

 private:
  std::uint64_t state_;
};

/// Stable seed derivation for sub-streams (per task, repetition, method, ...).
/// Splitmix-style mixing of the master seed with each component.
std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> components);

}  // namespace abrac
