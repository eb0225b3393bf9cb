#include "asal/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "asal/error.hpp"
#include "asal/kernels.hpp"

namespace asal {

Matrix PcaModel::project(const Matrix& x) const {
  return kernels::parallel::project(x, mean, components);
}

Matrix PcaModel::reconstruct(const Matrix& projected) const {
  Matrix out = matmul(projected, components);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 0; j < out.cols(); ++j) out(r, j) += mean(0, j);
  return out;
}

SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tolerance, std::size_t max_sweeps) {
  const std::size_t n = symmetric.rows();
  if (symmetric.cols() != n) throw DimensionError("jacobi_eigen needs a square matrix");
  Matrix a = symmetric;
  Matrix v = Matrix::identity(n);  // columns are eigenvectors

  double scale = 0.0;
  for (double x : a.data()) scale = std::max(scale, std::abs(x));
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= tolerance * tolerance * std::max(scale * scale, 1e-300)) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out;
  out.vectors = Matrix(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    out.values.push_back(a(order[r], order[r]));
    for (std::size_t k = 0; k < n; ++k) out.vectors(r, k) = v(k, order[r]);
  }
  return out;
}

PcaModel fit_pca(const Matrix& features, std::size_t k) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n < 2) throw ArgumentError("PCA needs at least two samples");
  if (k == 0 || k > d)
    throw ArgumentError("PCA width " + std::to_string(k) + " outside [1, " + std::to_string(d) + "]");

  PcaModel model;
  model.mean = Matrix(1, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) model.mean(0, j) += features(r, j);
  for (double& m : model.mean.data()) m /= static_cast<double>(n);

  Matrix cov(d, d);
  std::vector<double> centered(d);
  for (std::size_t r = 0; r < n; ++r) {
    auto x = features.row(r);
    for (std::size_t j = 0; j < d; ++j) centered[j] = x[j] - model.mean(0, j);
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = centered[i];
      if (ci == 0.0) continue;
      auto crow = cov.row(i);
      for (std::size_t j = i; j < d; ++j) crow[j] += ci * centered[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= static_cast<double>(n - 1);
      cov(j, i) = cov(i, j);
    }

  const SymmetricEigen eig = jacobi_eigen(cov);
  model.components = Matrix(k, d);
  for (std::size_t c = 0; c < k; ++c) {
    auto src = eig.vectors.row(c);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(src[j]) > std::abs(src[arg])) arg = j;
    const double sign = src[arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) model.components(c, j) = sign * src[j];
    model.explained_variance.push_back(std::max(eig.values[c], 0.0));
  }
  return model;
}

}  // namespace asal
