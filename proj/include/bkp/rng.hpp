#pragma once

#include <cmath>
#include <cstdint>

namespace bkp {

// ---------------------------------------------------------------------------
// Portable deterministic random source
// ---------------------------------------------------------------------------
// Synthetic corpora must be reproducible bit-for-bit from (seed, index) on
// any platform or language, so the generator and every derived distribution
// are pinned here instead of relying on std::random (whose distributions are
// implementation-defined).
//
//   * splitmix64 (Steele, Lea, Flood 2014) expands a 64-bit seed into the
//     xoshiro state.
//   * xoshiro256++ (Blackman, Vigna 2019) produces the output stream.
//   * unit() takes the top 53 bits: (next() >> 11) * 2^-53, in [0,1).
//   * normal() is the Box-Muller cosine branch and always consumes exactly
//     two unit() draws (no caching of the sine branch).

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& s : s_) s = sm.next();
  }

  /// Stream for corpus element `index`: the per-element seed is
  /// seed + (index + 1) * 0x9E3779B97F4A7C15 (mod 2^64).
  static Rng for_index(std::uint64_t seed, std::uint64_t index) {
    return Rng(seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
  }

  std::uint64_t next() {
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

  /// Uniform in [0,1), 53-bit resolution.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Uniform integer in [lo, hi] via scaled unit(); ranges here are tiny
  /// relative to 2^53 so the modulo-free mapping is unbiased enough and,
  /// above all, portable.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const double u = unit();
    return lo + static_cast<std::int64_t>(u * static_cast<double>(hi - lo + 1));
  }

  bool chance(double p) { return unit() < p; }

  double normal(double mean, double sigma) {
    // Box-Muller, cosine branch; u1 nudged away from 0.
    const double u1 = unit();
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1 > 0.0 ? u1 : 0x1.0p-53));
    return mean + sigma * r * std::cos(2.0 * M_PI * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

}  // namespace bkp
