#pragma once

// Portable random streams. Every sampler here is defined bit-for-bit so that
// another implementation can replay the same experiment rows:
//
//   splitmix64   state += 0x9E3779B97F4A7C15; z = state;
//                z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//                z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//                return z ^ (z >> 31)
//   seeding      xoshiro256** state words s0..s3 = four successive splitmix64(seed)
//   uniform01    (next() >> 11) * 2^-53                      in [0, 1)
//   normal       Box-Muller: u1 = 1 - uniform01(), u2 = uniform01(),
//                sqrt(-2 ln u1) * cos(2 pi u2)               (one draw per pair)
//   mix64(a, b)  fmix(a ^ fmix(b + 0x9E3779B97F4A7C15)), fmix = splitmix64 finalizer

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace krrstab::rng {

inline constexpr std::string_view kGeneratorId = "xoshiro256starstar+splitmix64";

constexpr std::uint64_t fmix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  return fmix(state);
}

/// Derives an independent stream seed from a master seed and a row key.
constexpr std::uint64_t mix64(std::uint64_t master, std::uint64_t key) {
  return fmix(master ^ fmix(key + 0x9E3779B97F4A7C15ULL));
}

/// xoshiro256** 1.0 (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Xoshiro256(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4]{};
};

}  // namespace krrstab::rng
