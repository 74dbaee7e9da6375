#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bilevel {

/* Deterministic random stream. Wraps std::mt19937_64 but derives every
   variate from raw 64-bit draws, so values do not depend on the standard
   library's distribution implementations. */
struct Rng {
  explicit Rng(std::uint64_t seed) : gen(seed) {}

  // 53-bit uniform in [0, 1)
  double uniform01() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Marsaglia polar method; caches the spare deviate.
  double normal() {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare = v * m;
    has_spare = true;
    return u * m;
  }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
  }

  std::mt19937_64 gen;
  double spare = 0.0;
  bool has_spare = false;
};

}  // namespace bilevel
