#pragma once

#include <cstdint>
#include <vector>

#include "mdl/matrix.hpp"

namespace mdl::linalg {

struct QrResult {
  Matrix q;
  Matrix r;
};

/// Householder QR of a square matrix. Q is orthogonal, R upper-triangular
/// with non-negative diagonal (signs fixed so the factorization is unique
/// for full-rank input).
QrResult qr_decompose(const Matrix& m);

/// Orthogonal matrix drawn from the QR of an n x n standard Gaussian sample.
/// Deterministic for a fixed seed.
Matrix random_orthogonal(std::size_t n, std::uint64_t seed);

struct SvdResult {
  Matrix u;                // m x r, orthonormal columns
  std::vector<double> s;   // r singular values, descending
  Matrix vt;               // r x n, orthonormal rows
};

/// Thin SVD via one-sided Jacobi, r = min(m, n). Singular values are sorted
/// descending and non-negative; zero-singular-value columns of U/V are
/// completed to keep the factors orthonormal.
SvdResult svd(const Matrix& m);

/// Orthonormal basis of the orthogonal complement of span(rows of b):
/// the right singular directions of b with singular value below 1e-9,
/// realized as a Householder completion of b's row space.
OrthonormalBasis null_space_basis(const OrthonormalBasis& b);

/// Top-m principal directions of a set of delta vectors. The second-moment
/// matrix is NOT re-centered: inputs are already differences from a base
/// point, which serves as the chart origin. Components are ordered by
/// decreasing singular value and sign-fixed (first nonzero coordinate
/// positive).
OrthonormalBasis pca_top_components(const std::vector<std::vector<double>>& vectors,
                                    std::size_t m);
OrthonormalBasis pca_top_components(const Matrix& deltas, std::size_t m);

}  // namespace mdl::linalg
