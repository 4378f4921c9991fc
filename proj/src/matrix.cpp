#include "mdl/matrix.hpp"

#include <cmath>

#include "mdl/gemm.hpp"

namespace mdl {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error::dimension("matrix data length does not match rows*cols");
  }
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error::dimension("matrix product shape mismatch");
  Matrix c(a.rows(), b.cols());
  dgemm(false, false, a.rows(), b.cols(), a.cols(), 1.0, a.data(), a.cols(),
        b.data(), b.cols(), 0.0, c.data(), c.cols());
  return c;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s = std::max(s, std::fabs(v));
  return s;
}

OrthonormalBasis::OrthonormalBasis(Matrix vectors) : vectors_(std::move(vectors)) {
  const std::size_t k = vectors_.rows();
  const std::size_t n = vectors_.cols();
  if (k > n) throw Error::dimension("orthonormal basis rank exceeds ambient dimension");
  for (std::size_t i = 0; i < k; ++i) {
    const double ni = norm2(vectors_.row(i), n);
    if (std::fabs(ni - 1.0) > 1e-9) {
      throw Error::data("basis row is not unit length");
    }
    for (std::size_t j = i + 1; j < k; ++j) {
      if (std::fabs(dot(vectors_.row(i), vectors_.row(j), n)) > 1e-9) {
        throw Error::data("basis rows are not orthogonal");
      }
    }
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double norm2(const double* a, std::size_t n) { return std::sqrt(dot(a, a, n)); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace mdl
