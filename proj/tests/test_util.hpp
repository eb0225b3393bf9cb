#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "asal/matrix.hpp"
#include "asal/rng.hpp"

namespace asal::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = scale * rng.normal();
  return m;
}

/// |a - b| / max(|a|, |b|, floor); the floor keeps near-zero gradients from
/// inflating the ratio.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of f at x along coordinate i.
inline double central_difference(const std::function<double(Matrix&)>& f, Matrix& x, std::size_t i,
                                 double h = 1e-5) {
  const double keep = x.data()[i];
  x.data()[i] = keep + h;
  const double up = f(x);
  x.data()[i] = keep - h;
  const double down = f(x);
  x.data()[i] = keep;
  return (up - down) / (2.0 * h);
}

}  // namespace asal::test
