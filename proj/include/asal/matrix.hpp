#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace asal {

/// Dense row-major matrix of doubles. Rows are samples throughout the library.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Matrix transpose() const;
  // Rows [first, first + count).
  Matrix slice_rows(std::size_t first, std::size_t count) const;
  Matrix gather_rows(std::span<const std::size_t> indices) const;
  void append_row(std::span<const double> values);
  void append_rows(const Matrix& other);

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a * b^T.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// out[i,j] = sum_k x[i,k] * weights[k,j] + bias[0,j]
Matrix linear_forward(const Matrix& x, const Matrix& weights, const Matrix& bias);

/// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

/// Natural-log Shannon entropy per row; 0 log 0 is taken as 0.
Matrix entropy(const Matrix& probs);

/// Entropy of a single probability row.
double row_entropy(std::span<const double> probs);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace asal
