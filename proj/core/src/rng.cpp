#include "abrac/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace abrac {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RngStream::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  return mix(state_);
}

double RngStream::uniform01() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  if (!(lo < hi)) {
    throw std::invalid_argument("uniform: requires lo < hi");
  }
  return lo + uniform01() * (hi - lo);
}

double RngStream::normal(double mean, double std) {
  if (std < 0.0) {
    throw std::invalid_argument("normal: requires std >= 0");
  }
  if (std == 0.0) return mean;
  const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
  const double u2 = uniform01();
  const double z =
      std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + std * z;
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) {
    throw std::invalid_argument("uniform_int: requires lo <= hi");
  }
  const std::uint64_t range =
      static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  if (range == 0) return static_cast<std::int64_t>(next_u64());  // full range
  const std::uint64_t reject_below = (0 - range) % range;  // 2^64 mod range
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= reject_below) {
      return lo + static_cast<std::int64_t>(x % range);
    }
  }
}

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> components) {
  std::uint64_t h = mix(master + 0x9E3779B97F4A7C15ull);
  for (std::uint64_t c : components) {
    h = mix(h ^ (c + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2)));
  }
  return h;
}

}  // namespace abrac
