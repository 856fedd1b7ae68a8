#pragma once

#include <cstdint>
#include <random>

#include "facediff/tensor.hpp"

namespace facediff {

/// Seeded generator with platform-stable normal and uniform draws.
///
/// std::normal_distribution is implementation-defined, so normals are produced
/// with Box-Muller directly on top of mt19937_64 to keep runs reproducible
/// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();
  /// Standard normal truncated to [-2, 2] by resampling.
  double truncated_normal();

  Tensor normal_tensor(int h, int w, int c);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent stream seed from a base seed and a salt.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace facediff
