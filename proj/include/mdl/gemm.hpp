#pragma once

#include <cstddef>

namespace mdl {

// C (m x n) = alpha * op(A) * op(B) + beta * C
// op(X) = X or X^T per the trans flags; all matrices row-major.
// Blocked, packed, and threaded over row panels of C. Every element of C is
// accumulated in a fixed k-order by exactly one thread, so the result is
// bit-identical for any thread count.
void dgemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
           double alpha, const double* a, std::size_t lda,
           const double* b, std::size_t ldb,
           double beta, double* c, std::size_t ldc);

}  // namespace mdl
