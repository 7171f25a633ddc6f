#pragma once

#include <cstdint>
#include <random>

#include "refcurve/normal.hpp"

namespace refcurve {

// Seeded generator with a documented identity (std::mt19937_64) so that
// streams are reproducible across platforms. Variates are derived from the
// raw 64-bit output directly; the std <random> distributions are
// implementation-defined and deliberately avoided.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform draw strictly inside (0,1), 53-bit resolution.
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform draw on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal draw via the inverse CDF.
  double normal() { return normal_quantile(uniform()); }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace refcurve
