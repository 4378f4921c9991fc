#include "mdl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdl/rng.hpp"

namespace mdl::linalg {

namespace {

// Householder QR of a (rows x cols) matrix with rows >= cols.
// Returns full Q (rows x rows) and R (rows x cols).
void householder_qr(const Matrix& a, Matrix* q_out, Matrix* r_out) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix r = a;
  std::vector<std::vector<double>> hh;  // Householder vectors, length m-k each
  hh.reserve(n);

  for (std::size_t k = 0; k < n && k + 1 <= m; ++k) {
    std::vector<double> v(m - k);
    for (std::size_t i = k; i < m; ++i) v[i - k] = r(i, k);
    double xnorm = 0.0;
    for (double x : v) xnorm += x * x;
    xnorm = std::sqrt(xnorm);
    if (xnorm == 0.0) {
      hh.push_back({});
      continue;
    }
    const double alpha = v[0] >= 0.0 ? -xnorm : xnorm;
    v[0] -= alpha;
    double vnorm2 = 0.0;
    for (double x : v) vnorm2 += x * x;
    if (vnorm2 <= 0.0) {
      hh.push_back({});
      continue;
    }
    // apply H = I - 2 v v^T / (v^T v) to the trailing block of R
    for (std::size_t j = k; j < n; ++j) {
      double proj = 0.0;
      for (std::size_t i = k; i < m; ++i) proj += v[i - k] * r(i, j);
      const double f = 2.0 * proj / vnorm2;
      for (std::size_t i = k; i < m; ++i) r(i, j) -= f * v[i - k];
    }
    r(k, k) = alpha;
    for (std::size_t i = k + 1; i < m; ++i) r(i, k) = 0.0;
    hh.push_back(std::move(v));
  }

  // accumulate Q = H_0 H_1 ... H_{p-1}
  Matrix q = Matrix::identity(m);
  for (std::size_t kk = hh.size(); kk-- > 0;) {
    const auto& v = hh[kk];
    if (v.empty()) continue;
    double vnorm2 = 0.0;
    for (double x : v) vnorm2 += x * x;
    for (std::size_t j = 0; j < m; ++j) {
      double proj = 0.0;
      for (std::size_t i = kk; i < m; ++i) proj += v[i - kk] * q(i, j);
      const double f = 2.0 * proj / vnorm2;
      for (std::size_t i = kk; i < m; ++i) q(i, j) -= f * v[i - kk];
    }
  }

  // fix signs so R's diagonal is non-negative
  for (std::size_t k = 0; k < n && k < m; ++k) {
    if (r(k, k) < 0.0) {
      for (std::size_t j = 0; j < n; ++j) r(k, j) = -r(k, j);
      for (std::size_t i = 0; i < m; ++i) q(i, k) = -q(i, k);
    }
  }

  *q_out = std::move(q);
  *r_out = std::move(r);
}

// One-sided Jacobi on a tall matrix (rows >= cols): orthogonalizes columns.
// On return W = U * diag(s) and V accumulates the rotations, so
// input = U diag(s) V^T with s unsorted.
void jacobi_sweeps(Matrix& w, Matrix& v) {
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  const double tol = 1e-15;
  const std::size_t max_sweeps = 64;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          app += wp * wp;
          aqq += wq * wq;
          apq += wp * wq;
        }
        if (app == 0.0 || aqq == 0.0) continue;
        if (std::fabs(apq) <= tol * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = cs * wp - sn * wq;
          w(i, q) = sn * wp + cs * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = cs * vp - sn * vq;
          v(i, q) = sn * vp + cs * vq;
        }
      }
    }
    if (!rotated) break;
  }
}

// SVD of a tall matrix (rows >= cols) with sorted singular values.
// U: rows x cols (columns orthonormal, completed where sigma = 0),
// V: cols x cols.
void svd_tall(const Matrix& a, Matrix* u_out, std::vector<double>* s_out, Matrix* v_out) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix w = a;
  Matrix v = Matrix::identity(n);
  jacobi_sweeps(w, v);

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += w(i, j) * w(i, j);
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Matrix u(m, n);
  Matrix vs(n, n);
  std::vector<double> s(n);
  const double smax = sigma.empty() ? 0.0 : sigma[order[0]];
  const double tiny = std::max(smax * 1e-14, 1e-300);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    s[j] = sigma[src];
    for (std::size_t i = 0; i < n; ++i) vs(i, j) = v(i, src);
    if (sigma[src] > tiny) {
      for (std::size_t i = 0; i < m; ++i) u(i, j) = w(i, src) / sigma[src];
    }
  }
  // complete columns for vanished singular values so U stays orthonormal
  for (std::size_t j = 0; j < n; ++j) {
    if (s[j] > tiny) continue;
    // not-yet-completed columns are all zero, so projecting against every
    // column except j is safe
    std::vector<double> best;
    double best_norm = -1.0;
    for (std::size_t cand = 0; cand < m; ++cand) {
      std::vector<double> e(m, 0.0);
      e[cand] = 1.0;
      for (std::size_t c = 0; c < n; ++c) {
        if (c == j) continue;
        double proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) proj += e[i] * u(i, c);
        for (std::size_t i = 0; i < m; ++i) e[i] -= proj * u(i, c);
      }
      double nrm = 0.0;
      for (double x : e) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (nrm > best_norm) {
        best_norm = nrm;
        best = std::move(e);
      }
      if (best_norm > 0.9) break;  // good enough candidate found
    }
    if (best_norm <= 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t c = 0; c < n; ++c) {
        if (c == j) continue;
        double proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) proj += best[i] * u(i, c);
        for (std::size_t i = 0; i < m; ++i) best[i] -= proj * u(i, c);
      }
    }
    double nrm = 0.0;
    for (double x : best) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm > 0.0) {
      for (std::size_t i = 0; i < m; ++i) u(i, j) = best[i] / nrm;
    }
  }

  *u_out = std::move(u);
  *s_out = std::move(s);
  *v_out = std::move(vs);
}

}  // namespace

QrResult qr_decompose(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error::dimension("qr_decompose requires a square matrix");
  }
  if (!m.all_finite()) throw Error::data("qr_decompose: non-finite entries");
  QrResult out;
  householder_qr(m, &out.q, &out.r);
  return out;
}

Matrix random_orthogonal(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error::dimension("random_orthogonal: dimension must be >= 1");
  Rng rng(seed);
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g(i, j) = rng.normal();
  }
  return qr_decompose(g).q;
}

SvdResult svd(const Matrix& m) {
  if (!m.all_finite()) throw Error::data("svd: non-finite entries");
  SvdResult out;
  if (m.rows() >= m.cols()) {
    svd_tall(m, &out.u, &out.s, &out.vt);
    out.vt = out.vt.transposed();
  } else {
    // svd(A^T) = U' S V'^T  =>  A = V' S U'^T
    Matrix u2, v2;
    std::vector<double> s2;
    svd_tall(m.transposed(), &u2, &s2, &v2);
    out.u = std::move(v2);
    out.s = std::move(s2);
    out.vt = u2.transposed();
  }
  return out;
}

OrthonormalBasis null_space_basis(const OrthonormalBasis& b) {
  const std::size_t m = b.rank();
  const std::size_t n = b.ambient_dim();
  if (m >= n) {
    throw Error::dimension("null_space_basis: basis already spans the ambient space");
  }
  // Full Q of the QR of b^T: the first m columns span b's row space, the
  // remaining n-m columns are exactly the singular directions of b with
  // zero singular value.
  Matrix q, r;
  householder_qr(b.vectors().transposed(), &q, &r);
  Matrix comp(n - m, n);
  for (std::size_t j = m; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) comp(j - m, i) = q(i, j);
  }
  return OrthonormalBasis(std::move(comp));
}

OrthonormalBasis pca_top_components(const Matrix& deltas, std::size_t m) {
  if (deltas.rows() < m) {
    throw Error::data("pca_top_components: fewer vectors than requested components");
  }
  SvdResult dec = svd(deltas);
  if (dec.s.size() < m || dec.s[m - 1] < 1e-12) {
    throw Error::data("pca_top_components: input rank below requested components");
  }
  const std::size_t n = deltas.cols();
  Matrix top(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = dec.vt.row(i);
    double sign = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::fabs(row[j]) > 1e-12) {
        sign = row[j] > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::size_t j = 0; j < n; ++j) top(i, j) = sign * row[j];
  }
  return OrthonormalBasis(std::move(top));
}

OrthonormalBasis pca_top_components(const std::vector<std::vector<double>>& vectors,
                                    std::size_t m) {
  if (vectors.empty()) throw Error::data("pca_top_components: no input vectors");
  const std::size_t n = vectors.front().size();
  Matrix deltas(vectors.size(), n);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != n) throw Error::dimension("pca_top_components: ragged input");
    for (std::size_t j = 0; j < n; ++j) deltas(i, j) = vectors[i][j];
  }
  return pca_top_components(deltas, m);
}

}  // namespace mdl::linalg
