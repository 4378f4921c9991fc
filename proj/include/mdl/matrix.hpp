#pragma once

#include <cstddef>
#include <vector>

#include "mdl/common.hpp"

namespace mdl {

// Dense real matrix, row-major, double precision.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  bool all_finite() const;

  Matrix transposed() const;

  static Matrix identity(std::size_t n);

  // Plain product; small operands only. Heavy paths go through dgemm.
  friend Matrix operator*(const Matrix& a, const Matrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);

// Rows form an orthonormal set in R^ambient. Construction verifies unit
// norms and pairwise orthogonality to 1e-9.
class OrthonormalBasis {
 public:
  OrthonormalBasis() = default;
  explicit OrthonormalBasis(Matrix vectors);

  const Matrix& vectors() const { return vectors_; }
  std::size_t rank() const { return vectors_.rows(); }
  std::size_t ambient_dim() const { return vectors_.cols(); }
  const double* vector(std::size_t i) const { return vectors_.row(i); }

 private:
  Matrix vectors_;
};

// vector helpers over raw spans
double dot(const double* a, const double* b, std::size_t n);
double norm2(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

}  // namespace mdl
