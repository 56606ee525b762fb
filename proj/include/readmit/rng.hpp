#pragma once

#include <cmath>
#include <cstdint>

namespace readmit {

// Counter-based pseudo-random stream (splitmix64 over seed + draw index).
// Identical seed implies an identical draw sequence on every platform; no
// std::random distributions are used anywhere so artifacts stay byte-stable.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(derive(seed, stream)) {}

  // Deterministically derives an independent seed from (seed, tag).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
    return mix(seed ^ mix(tag + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(seed_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  // [0, 1)
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller; consumes exactly two draws per call.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Unbiased integer in [0, n); n >= 1.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  double exponential(double mean) {
    double u = uniform01();
    if (u <= 0.0) u = 0x1.0p-53;
    return -mean * std::log(u);
  }

  // Knuth; adequate for the small means used by the cohort generator.
  int poisson(double mean) {
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01();
    } while (p > limit);
    return k - 1;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace readmit
