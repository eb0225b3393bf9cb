#pragma once

#include <cstddef>
#include <vector>

#include "asal/matrix.hpp"

namespace asal {

/// Mean-centred projection onto the leading principal axes (unwhitened).
struct PcaModel {
  Matrix mean;        // 1 x d
  Matrix components;  // k x d, orthonormal rows, descending eigenvalue
  std::vector<double> explained_variance;  // eigenvalue per component

  std::size_t input_width() const { return mean.cols(); }
  std::size_t output_width() const { return components.rows(); }

  Matrix project(const Matrix& x) const;
  /// Maps projected rows back to the input space: f * components + mean.
  Matrix reconstruct(const Matrix& projected) const;
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Returns eigenvalues (descending) and eigenvectors as rows.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};
SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tolerance = 1e-15,
                            std::size_t max_sweeps = 100);

/// Fits on the rows of `features`. Components are the top-k covariance
/// eigenvectors with the largest-magnitude entry made positive. When the data
/// rank is below k the trailing components are zero-variance directions that
/// complete an orthonormal basis.
PcaModel fit_pca(const Matrix& features, std::size_t k);

/// Effective projection width for a requested k on d-wide features.
inline std::size_t clamp_pca_width(std::size_t requested, std::size_t width) {
  return requested < width ? requested : width;
}

}  // namespace asal
