#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fregi {

// splitmix64; used to spawn decorrelated child seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic draw helpers layered on mt19937_64.  std::*_distribution is
// avoided on purpose: its output sequences are implementation-defined, and
// fixed-seed reproducibility is part of the contract here.
struct RandomStream {
  std::mt19937_64 eng;
  bool has_spare = false;
  double spare = 0.0;

  explicit RandomStream(std::uint64_t seed) : eng(seed) {}
  RandomStream(std::uint64_t seed, std::uint64_t stream) : eng(mix_seed(seed, stream)) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double u01() { return double(eng() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Uniform integer in [0, n); rejection sampling, no modulo bias.
  std::uint64_t uint_below(std::uint64_t n) {
    const std::uint64_t t = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = eng();
      if (r >= t) return r % n;
    }
  }

  // Standard normal via Box-Muller (explicit so sequences are reproducible).
  double gauss() {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    double u1 = u01();
    while (u1 <= 0.0) u1 = u01();
    const double u2 = u01();
    const double m = std::sqrt(-2.0 * std::log(u1));
    spare = m * std::sin(2.0 * 3.14159265358979323846 * u2);
    has_spare = true;
    return m * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double gauss(double mu, double sigma) { return mu + sigma * gauss(); }

  bool bernoulli(double p) { return u01() < p; }
};

}  // namespace fregi
