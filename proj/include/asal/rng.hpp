#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "asal/matrix.hpp"

namespace asal {

/// Seeded generator with platform-independent draws. The std distributions are
/// implementation-defined, so uniform/normal conversions are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) by rejection.
  std::size_t index(std::size_t n);

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  Matrix normal_matrix(std::size_t rows, std::size_t cols);

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

  /// Derive an independent stream for a named sub-task.
  Rng fork(std::uint64_t salt);

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// SplitMix64 mixing; used to derive per-cycle and per-component seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace asal
