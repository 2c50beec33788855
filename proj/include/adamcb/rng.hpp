#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "adamcb/errors.hpp"

namespace adamcb {

// Deterministic, splittable random stream.
//
// The requirement is bit-reproducibility: the same (seed, label path) must
// produce the same draws on every platform and in every build. mt19937_64
// output is fully pinned by the standard, so only the variate transforms
// could vary -- the std:: distribution types are implementation-defined,
// which is why the transforms below are spelled out by hand:
//
//   uniform01    takes the top 53 bits of one engine output, giving a
//                uniform double in [0, 1).
//   uniform_int  masks engine output down to the next power of two and
//                rejects values >= bound.
//   normal       is Box-Muller: sqrt(-2 ln u1) * cos(2 pi u2) with
//                u1 in (0, 1].
//
// Child streams come from split(label): the child seed is
// splitmix64(parent_seed ^ fnv1a64(label)), so independently labelled
// consumers (data generation, batch sampling, parameter init, ...) never
// share or disturb each other's streams no matter how many draws each one
// makes.
class SplitRng {
 public:
  explicit SplitRng(uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  SplitRng split(std::string_view label) const {
    return SplitRng(splitmix64(seed_ ^ fnv1a64(label)));
  }

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform in {0, 1, ..., bound-1} by masked rejection (unbiased).
  int uniform_int(int bound) {
    if (bound <= 0) throw ContractError("uniform_int: bound must be positive");
    const uint64_t b = static_cast<uint64_t>(bound);
    const uint64_t mask = std::bit_ceil(b) - 1;
    uint64_t r;
    do {
      r = next_u64() & mask;
    } while (r >= b);
    return static_cast<int>(r);
  }

  // Standard normal via Box-Muller. Two uniforms per call; no state is
  // carried between calls, so draw counts stay easy to reason about.
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log() finite
    const double u2 = uniform01();
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  static uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  static uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return h;
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace adamcb
