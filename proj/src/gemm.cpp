#include "mdl/gemm.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#include "mdl/parallel.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace mdl {

namespace {

constexpr std::size_t MR = 8;
constexpr std::size_t NR = 16;
constexpr std::size_t KC = 256;
constexpr std::size_t MC = 64;

// Packed A panel: strips of MR rows, k-major within a strip, zero-padded.
void pack_a(bool trans, const double* a, std::size_t lda, std::size_t row0,
            std::size_t mc, std::size_t k0, std::size_t kc, double* out) {
  for (std::size_t i = 0; i < mc; i += MR) {
    const std::size_t mr = std::min(MR, mc - i);
    for (std::size_t kk = 0; kk < kc; ++kk) {
      for (std::size_t r = 0; r < MR; ++r) {
        double v = 0.0;
        if (r < mr) {
          const std::size_t gi = row0 + i + r;
          const std::size_t gk = k0 + kk;
          v = trans ? a[gk * lda + gi] : a[gi * lda + gk];
        }
        *out++ = v;
      }
    }
  }
}

// Packed B panel: strips of NR columns, k-major within a strip, zero-padded.
void pack_b(bool trans, const double* b, std::size_t ldb, std::size_t k0,
            std::size_t kc, std::size_t col0, std::size_t nc, double* out) {
  for (std::size_t j = 0; j < nc; j += NR) {
    const std::size_t nr = std::min(NR, nc - j);
    for (std::size_t kk = 0; kk < kc; ++kk) {
      const std::size_t gk = k0 + kk;
      if (!trans && nr == NR) {
        std::memcpy(out, b + gk * ldb + col0 + j, NR * sizeof(double));
        out += NR;
        continue;
      }
      for (std::size_t c = 0; c < NR; ++c) {
        double v = 0.0;
        if (c < nr) {
          const std::size_t gj = col0 + j + c;
          v = trans ? b[gj * ldb + gk] : b[gk * ldb + gj];
        }
        *out++ = v;
      }
    }
  }
}

#if defined(__AVX512F__)

void kernel(std::size_t kc, const double* ap, const double* bp, double* acc_out) {
  __m512d acc00 = _mm512_setzero_pd(), acc01 = _mm512_setzero_pd();
  __m512d acc10 = _mm512_setzero_pd(), acc11 = _mm512_setzero_pd();
  __m512d acc20 = _mm512_setzero_pd(), acc21 = _mm512_setzero_pd();
  __m512d acc30 = _mm512_setzero_pd(), acc31 = _mm512_setzero_pd();
  __m512d acc40 = _mm512_setzero_pd(), acc41 = _mm512_setzero_pd();
  __m512d acc50 = _mm512_setzero_pd(), acc51 = _mm512_setzero_pd();
  __m512d acc60 = _mm512_setzero_pd(), acc61 = _mm512_setzero_pd();
  __m512d acc70 = _mm512_setzero_pd(), acc71 = _mm512_setzero_pd();
  for (std::size_t kk = 0; kk < kc; ++kk) {
    const __m512d b0 = _mm512_loadu_pd(bp);
    const __m512d b1 = _mm512_loadu_pd(bp + 8);
    __m512d av;
    av = _mm512_set1_pd(ap[0]);
    acc00 = _mm512_fmadd_pd(av, b0, acc00);
    acc01 = _mm512_fmadd_pd(av, b1, acc01);
    av = _mm512_set1_pd(ap[1]);
    acc10 = _mm512_fmadd_pd(av, b0, acc10);
    acc11 = _mm512_fmadd_pd(av, b1, acc11);
    av = _mm512_set1_pd(ap[2]);
    acc20 = _mm512_fmadd_pd(av, b0, acc20);
    acc21 = _mm512_fmadd_pd(av, b1, acc21);
    av = _mm512_set1_pd(ap[3]);
    acc30 = _mm512_fmadd_pd(av, b0, acc30);
    acc31 = _mm512_fmadd_pd(av, b1, acc31);
    av = _mm512_set1_pd(ap[4]);
    acc40 = _mm512_fmadd_pd(av, b0, acc40);
    acc41 = _mm512_fmadd_pd(av, b1, acc41);
    av = _mm512_set1_pd(ap[5]);
    acc50 = _mm512_fmadd_pd(av, b0, acc50);
    acc51 = _mm512_fmadd_pd(av, b1, acc51);
    av = _mm512_set1_pd(ap[6]);
    acc60 = _mm512_fmadd_pd(av, b0, acc60);
    acc61 = _mm512_fmadd_pd(av, b1, acc61);
    av = _mm512_set1_pd(ap[7]);
    acc70 = _mm512_fmadd_pd(av, b0, acc70);
    acc71 = _mm512_fmadd_pd(av, b1, acc71);
    ap += MR;
    bp += NR;
  }
  _mm512_storeu_pd(acc_out + 0, acc00);
  _mm512_storeu_pd(acc_out + 8, acc01);
  _mm512_storeu_pd(acc_out + 16, acc10);
  _mm512_storeu_pd(acc_out + 24, acc11);
  _mm512_storeu_pd(acc_out + 32, acc20);
  _mm512_storeu_pd(acc_out + 40, acc21);
  _mm512_storeu_pd(acc_out + 48, acc30);
  _mm512_storeu_pd(acc_out + 56, acc31);
  _mm512_storeu_pd(acc_out + 64, acc40);
  _mm512_storeu_pd(acc_out + 72, acc41);
  _mm512_storeu_pd(acc_out + 80, acc50);
  _mm512_storeu_pd(acc_out + 88, acc51);
  _mm512_storeu_pd(acc_out + 96, acc60);
  _mm512_storeu_pd(acc_out + 104, acc61);
  _mm512_storeu_pd(acc_out + 112, acc70);
  _mm512_storeu_pd(acc_out + 120, acc71);
}

#else

void kernel(std::size_t kc, const double* ap, const double* bp, double* acc_out) {
  double acc[MR * NR] = {};
  for (std::size_t kk = 0; kk < kc; ++kk) {
    for (std::size_t r = 0; r < MR; ++r) {
      const double av = ap[r];
      double* arow = acc + r * NR;
      for (std::size_t c = 0; c < NR; ++c) arow[c] += av * bp[c];
    }
    ap += MR;
    bp += NR;
  }
  std::memcpy(acc_out, acc, sizeof(acc));
}

#endif

struct Scratch {
  std::vector<double> a_pack;
  std::vector<double> acc;
};

thread_local Scratch scratch;

// One thread's share: rows [row0, row1) of C, full n/k, against a shared
// packed B panel for k block [k0, k0+kc).
void gemm_rows(bool trans_a, const double* a, std::size_t lda, double alpha,
               const double* b_pack, std::size_t k0, std::size_t kc,
               std::size_t n, double* c, std::size_t ldc,
               std::size_t row0, std::size_t row1) {
  Scratch& s = scratch;
  s.a_pack.resize(MC * KC);
  s.acc.resize(MR * NR);
  for (std::size_t ic = row0; ic < row1; ic += MC) {
    const std::size_t mc = std::min(MC, row1 - ic);
    pack_a(trans_a, a, lda, ic, mc, k0, kc, s.a_pack.data());
    for (std::size_t jr = 0; jr < n; jr += NR) {
      const std::size_t nr = std::min(NR, n - jr);
      const double* bp = b_pack + (jr / NR) * (kc * NR);
      for (std::size_t ir = 0; ir < mc; ir += MR) {
        const std::size_t mr = std::min(MR, mc - ir);
        const double* ap = s.a_pack.data() + (ir / MR) * (kc * MR);
        kernel(kc, ap, bp, s.acc.data());
        double* cblk = c + (ic + ir) * ldc + jr;
        for (std::size_t r = 0; r < mr; ++r) {
          const double* arow = s.acc.data() + r * NR;
          double* crow = cblk + r * ldc;
          for (std::size_t cc = 0; cc < nr; ++cc) crow[cc] += alpha * arow[cc];
        }
      }
    }
  }
}

}  // namespace

void dgemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
           double alpha, const double* a, std::size_t lda,
           const double* b, std::size_t ldb,
           double beta, double* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;

  if (beta == 0.0) {
    for (std::size_t i = 0; i < m; ++i) std::memset(c + i * ldc, 0, n * sizeof(double));
  } else if (beta != 1.0) {
    for (std::size_t i = 0; i < m; ++i) {
      double* row = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) row[j] *= beta;
    }
  }
  if (k == 0 || alpha == 0.0) return;

  static thread_local std::vector<double> b_pack;
  const std::size_t n_padded = (n + NR - 1) / NR * NR;
  b_pack.resize(n_padded * KC);
  double* const b_pack_data = b_pack.data();  // thread_locals are not captured

  const bool threaded = m * n * k >= (std::size_t{1} << 20);

  for (std::size_t k0 = 0; k0 < k; k0 += KC) {
    const std::size_t kc = std::min(KC, k - k0);
    pack_b(trans_b, b, ldb, k0, kc, 0, n, b_pack_data);
    if (!threaded) {
      gemm_rows(trans_a, a, lda, alpha, b_pack_data, k0, kc, n, c, ldc, 0, m);
    } else {
      // chunk boundaries aligned to MR so tiles never straddle threads
      const std::size_t blocks = (m + MR - 1) / MR;
      parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
        gemm_rows(trans_a, a, lda, alpha, b_pack_data, k0, kc, n, c, ldc,
                  b0 * MR, std::min(b1 * MR, m));
      });
    }
  }
}

}  // namespace mdl
