#pragma once

#include <array>
#include <cstdint>

namespace centile {

/// xoshiro256** pseudo-random generator, seeded through splitmix64.
///
/// The stream is fully specified by the seed, so simulated cohorts are
/// reproducible across platforms and standard libraries.  Distribution
/// transforms are implemented here rather than with <random>, whose
/// distributions are implementation-defined.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform on the open interval (0,1), 53-bit resolution.
  double uniform();

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal deviate (Marsaglia polar method, spare value cached).
  double normal();

  /// Standard Laplace deviate (median 0, scale 1).
  double laplace();

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace centile
