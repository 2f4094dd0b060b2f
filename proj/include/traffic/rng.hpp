#pragma once

#include <bit>
#include <cstdint>

// Deterministic randomness utilities. SplitMix64 doubles as a tiny generator
// and, through mix64/combine, as the hash used to derive independent seeds
// (per sweep cell, per packet, per step and node). Counter-style derivation
// keeps results independent of evaluation order, which the engine and the
// sweep driver rely on. We avoid std::uniform_*_distribution on purpose:
// its output is not pinned by the standard, and output files must be
// reproducible byte for byte.

namespace traffic {

inline constexpr uint64_t kGolden64 = 0x9e3779b97f4a7c15ull;

constexpr uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

// Order-sensitive combine: combine(a, b) != combine(b, a) in general.
constexpr uint64_t combine(uint64_t seed, uint64_t value) {
  return mix64(seed ^ (mix64(value + kGolden64) + kGolden64 + (seed << 6) + (seed >> 2)));
}

inline uint64_t combine(uint64_t seed, double value) {
  return combine(seed, std::bit_cast<uint64_t>(value));
}

class SplitMix64 {
 public:
  using result_type = uint64_t;

  explicit constexpr SplitMix64(uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ull; }

  constexpr result_type operator()() { return mix64(state_ += kGolden64); }

 private:
  uint64_t state_;
};

// Uniform double in [0, 1) with 53-bit resolution.
template <class Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased uniform integer in [0, n), n >= 1. Lemire's multiply-shift
// rejection method.
template <class Rng>
uint64_t uniform_below(Rng& rng, uint64_t n) {
  unsigned __int128 m = static_cast<unsigned __int128>(rng()) * n;
  auto lo = static_cast<uint64_t>(m);
  if (lo < n) {
    const uint64_t t = (0 - n) % n;
    while (lo < t) {
      m = static_cast<unsigned __int128>(rng()) * n;
      lo = static_cast<uint64_t>(m);
    }
  }
  return static_cast<uint64_t>(m >> 64);
}

}  // namespace traffic
