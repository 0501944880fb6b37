#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace vloc {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent child seeds from a
// (seed, stream, counter) triple so that work items can be generated in any
// order and still reproduce the sequential result.
constexpr std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t counter = 0) {
  return MixSeed(MixSeed(seed ^ MixSeed(stream)) + counter);
}

inline Rng MakeRng(std::uint64_t seed, std::uint64_t stream = 0,
                   std::uint64_t counter = 0) {
  return Rng(DeriveSeed(seed, stream, counter));
}

// Uniform double in [0, 1) built from the top 53 bits; unlike
// std::uniform_real_distribution the result is identical across standard
// library implementations.
inline double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double Uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * Uniform01(rng);
}

// Uniform integer in [0, n) by rejection (portable, unbiased).
inline std::uint64_t UniformIndex(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

// Standard normal via Marsaglia's polar method; portable across stdlibs.
class Gaussian {
 public:
  double operator()(Rng& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * Uniform01(rng) - 1.0;
      v = 2.0 * Uniform01(rng) - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace vloc
