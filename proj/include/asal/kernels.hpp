#pragma once

// Data-parallel inner loops. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::parallel with the same
// signature. Rows are processed independently and reductions use a total
// order, so both versions return bit-identical results.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "asal/matrix.hpp"
#include "asal/mlp.hpp"
#include "asal/query_mask.hpp"

namespace asal {
class Classifier;
}

namespace asal::kernels {

inline constexpr std::size_t kRowChunk = 512;

struct Neighbor {
  std::size_t index = 0;
  double distance_sq = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// (distance, index) lexicographic order used for all neighbour ties.
inline bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance_sq < b.distance_sq || (a.distance_sq == b.distance_sq && a.index < b.index);
}

namespace serial {

/// min_sq[i] = min(min_sq[i], |points[i] - center|^2) for every row.
void update_min_distance(const Matrix& points, std::span<const double> center,
                         std::span<double> min_sq);

/// Network layers [0, stop) applied to every row.
Matrix map_rows(const Mlp& net, const Matrix& x, std::size_t stop);
/// Classifier entropy of every row.
std::vector<double> entropy_scores(const Classifier& model, const Matrix& x);
/// (x - mean) * components^T; mean is 1 x d, components k x d.
Matrix project(const Matrix& x, const Matrix& mean, const Matrix& components);
/// Exhaustive k-NN over unmasked rows, ascending (distance, index). mask may be null.
std::vector<Neighbor> k_nearest(const Matrix& points, std::span<const double> query, std::size_t k,
                                const QueryMask* mask);

}  // namespace serial

namespace parallel {

/// min_sq[i] = min(min_sq[i], |points[i] - center|^2) for every row.
void update_min_distance(const Matrix& points, std::span<const double> center,
                         std::span<double> min_sq);

Matrix map_rows(const Mlp& net, const Matrix& x, std::size_t stop);
std::vector<double> entropy_scores(const Classifier& model, const Matrix& x);
Matrix project(const Matrix& x, const Matrix& mean, const Matrix& components);
std::vector<Neighbor> k_nearest(const Matrix& points, std::span<const double> query, std::size_t k,
                                const QueryMask* mask);

}  // namespace parallel

/// Restricts OpenMP to one thread for the lifetime of the guard.
class SingleThreadScope {
 public:
  SingleThreadScope();
  ~SingleThreadScope();
  SingleThreadScope(const SingleThreadScope&) = delete;
  SingleThreadScope& operator=(const SingleThreadScope&) = delete;

 private:
  int previous_ = 1;
};

int max_threads();

}  // namespace asal::kernels
