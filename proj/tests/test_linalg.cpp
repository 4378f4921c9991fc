#include <doctest.h>

#include <cmath>

#include "mdl/gemm.hpp"
#include "mdl/linalg.hpp"
#include "mdl/rng.hpp"
#include "test_oracles.hpp"

using namespace mdl;
using namespace mdl::linalg;

TEST_SUITE_BEGIN("linalg");

TEST_CASE("qr of identity is identity") {
  const auto [q, r] = qr_decompose(Matrix::identity(3));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(q(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
      CHECK(r(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("qr of a permutation is orthogonal") {
  Matrix m(2, 2);
  m(0, 1) = 1.0;
  m(1, 0) = 1.0;
  const auto [q, r] = qr_decompose(m);
  // Q^T Q = I
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 2; ++k) s += q(k, i) * q(k, j);
      CHECK(std::fabs(s - (i == j ? 1.0 : 0.0)) < 1e-12);
    }
  }
  const double det = q(0, 0) * q(1, 1) - q(0, 1) * q(1, 0);
  CHECK(std::fabs(std::fabs(det) - 1.0) < 1e-12);
}

TEST_CASE("qr reconstructs a random matrix") {
  Rng rng(11);
  Matrix m(10, 10);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 10; ++j) m(i, j) = rng.normal();
  }
  const auto [q, r] = qr_decompose(m);
  const Matrix qr = q * r;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    num += (qr.data()[i] - m.data()[i]) * (qr.data()[i] - m.data()[i]);
    den += m.data()[i] * m.data()[i];
  }
  CHECK(std::sqrt(num / den) < 1e-10);

  // orthogonality, triangularity, sign convention
  Matrix qtq(10, 10);
  dgemm(true, false, 10, 10, 10, 1.0, q.data(), 10, q.data(), 10, 0.0, qtq.data(), 10);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 10; ++j) {
      CHECK(std::fabs(qtq(i, j) - (i == j ? 1.0 : 0.0)) < 1e-9);
      if (i > j) CHECK(std::fabs(r(i, j)) < 1e-12);
    }
    CHECK(r(i, i) >= 0.0);
  }
}

TEST_CASE("qr rejects non-square input") {
  CHECK_THROWS_AS((void)qr_decompose(Matrix(3, 2)), Error);
}

TEST_CASE("random_orthogonal in one dimension is a sign") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 99ull}) {
    const Matrix q = random_orthogonal(1, seed);
    CHECK(std::fabs(std::fabs(q(0, 0)) - 1.0) < 1e-12);
  }
}

TEST_CASE("random_orthogonal preserves pairwise distance") {
  const std::size_t n = 50;
  const Matrix q = random_orthogonal(n, 42);
  Rng rng(5);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  std::vector<double> qa(n, 0.0), qb(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      qa[i] += q(i, j) * a[j];
      qb[i] += q(i, j) * b[j];
    }
  }
  double before = 0.0, after = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    before += (a[i] - b[i]) * (a[i] - b[i]);
    after += (qa[i] - qb[i]) * (qa[i] - qb[i]);
  }
  CHECK(std::fabs(std::sqrt(after) / std::sqrt(before) - 1.0) < 1e-9);
}

TEST_CASE("random_orthogonal is deterministic per seed") {
  const Matrix a = random_orthogonal(17, 123);
  const Matrix b = random_orthogonal(17, 123);
  CHECK(a.values() == b.values());
  CHECK_THROWS_AS((void)random_orthogonal(0, 1), Error);
}

TEST_CASE("svd of a diagonal matrix") {
  Matrix m(2, 2);
  m(0, 0) = 3.0;
  m(1, 1) = 1.0;
  const SvdResult d = svd(m);
  REQUIRE(d.s.size() == 2);
  CHECK(d.s[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(d.s[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd of a rank-1 outer product") {
  const std::size_t n = 6;
  Rng rng(3);
  std::vector<double> u(n), v(n);
  for (auto& x : u) x = rng.normal();
  for (auto& x : v) x = rng.normal();
  const double nu = norm2(u.data(), n), nv = norm2(v.data(), n);
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m(i, j) = (u[i] / nu) * (v[j] / nv);
  }
  const SvdResult d = svd(m);
  CHECK(std::fabs(d.s[0] - 1.0) < 1e-10);
  for (std::size_t k = 1; k < d.s.size(); ++k) CHECK(std::fabs(d.s[k]) < 1e-10);
}

static void check_svd_contract(const Matrix& m) {
  const SvdResult d = svd(m);
  const std::size_t r = d.s.size();
  REQUIRE(r == std::min(m.rows(), m.cols()));
  for (std::size_t k = 1; k < r; ++k) CHECK(d.s[k - 1] >= d.s[k]);
  for (double s : d.s) CHECK(s >= 0.0);

  // reconstruction
  Matrix us(m.rows(), r);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t k = 0; k < r; ++k) us(i, k) = d.u(i, k) * d.s[k];
  }
  const Matrix rec = us * d.vt;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i) {
    num += (rec.data()[i] - m.data()[i]) * (rec.data()[i] - m.data()[i]);
    den += m.data()[i] * m.data()[i];
  }
  CHECK(std::sqrt(num / den) < 1e-10);

  // orthonormal factors
  CHECK(oracle::max_abs_offdiag_gram(d.u.transposed()) < 1e-9);
  CHECK(oracle::max_abs_offdiag_gram(d.vt) < 1e-9);
}

TEST_CASE("svd reconstructs wide and tall matrices") {
  Rng rng(7);
  Matrix wide(5, 8), tall(9, 4);
  for (auto* m : {&wide, &tall}) {
    for (std::size_t i = 0; i < m->rows() * m->cols(); ++i) {
      m->data()[i] = rng.normal();
    }
    check_svd_contract(*m);
  }
}

TEST_CASE("null space of a single axis vector") {
  Matrix b(1, 3);
  b(0, 0) = 1.0;
  const OrthonormalBasis ns = null_space_basis(OrthonormalBasis(b));
  REQUIRE(ns.rank() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::fabs(ns.vector(i)[0]) < 1e-12);  // orthogonal to e1
  }
  // spans the e2-e3 plane: projecting e2 and e3 onto the basis loses nothing
  for (std::size_t axis : {1u, 2u}) {
    double e[3] = {0, 0, 0};
    e[axis] = 1.0;
    double res = 1.0;
    for (std::size_t i = 0; i < 2; ++i) {
      const double p = dot(e, ns.vector(i), 3);
      res -= p * p;
    }
    CHECK(std::fabs(res) < 1e-12);
  }
}

TEST_CASE("null space completes an orthonormal set") {
  const std::size_t n = 12, m = 5;
  const Matrix q = random_orthogonal(n, 8);
  Matrix rows(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) rows(i, j) = q(i, j);
  }
  const OrthonormalBasis basis(rows);
  const OrthonormalBasis ns = null_space_basis(basis);
  REQUIRE(ns.rank() == n - m);

  Matrix stacked(n, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) stacked(i, j) = rows(i, j);
  }
  for (std::size_t i = 0; i < n - m; ++i) {
    for (std::size_t j = 0; j < n; ++j) stacked(m + i, j) = ns.vector(i)[j];
  }
  CHECK(oracle::max_abs_offdiag_gram(stacked) < 1e-8);
}

TEST_CASE("null space of the circle tangent is radial") {
  Matrix t(1, 2);
  t(0, 1) = 1.0;  // tangent at (1,0)
  const OrthonormalBasis ns = null_space_basis(OrthonormalBasis(t));
  REQUIRE(ns.rank() == 1);
  const double d[2] = {1.0, 0.0};
  CHECK(std::fabs(std::fabs(dot(ns.vector(0), d, 2)) - 1.0) < 1e-12);
}

TEST_CASE("null space rejects a full basis") {
  CHECK_THROWS_AS((void)null_space_basis(OrthonormalBasis(Matrix::identity(3))), Error);
}

TEST_CASE("pca of collinear vectors finds the line") {
  std::vector<std::vector<double>> deltas;
  for (int i = 1; i <= 5; ++i) deltas.push_back({0.25 * i, 0.0, 0.0});
  const OrthonormalBasis b = pca_top_components(deltas, 1);
  CHECK(b.vector(0)[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(b.vector(0)[1]) < 1e-12);
}

TEST_CASE("pca recovers the circle tangent from neighbor deltas") {
  // neighbors of (1,0) on the unit circle within a small arc
  std::vector<std::vector<double>> deltas;
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const double theta = rng.uniform(-0.05, 0.05);
    deltas.push_back({std::cos(theta) - 1.0, std::sin(theta)});
  }
  const OrthonormalBasis b = pca_top_components(deltas, 1);
  const double angle = std::acos(std::min(1.0, std::fabs(b.vector(0)[1])));
  CHECK(angle < 0.05);
}

TEST_CASE("pca matches the brute-force second-moment eigenvectors") {
  Rng rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t k = 30, n = 7, m = 3;
    Matrix deltas(k, n);
    for (std::size_t i = 0; i < k * n; ++i) deltas.data()[i] = rng.normal();
    const OrthonormalBasis got = pca_top_components(deltas, m);

    // uncentered second moment, eigen-decomposed independently
    Matrix moment(n, n);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t c = 0; c < n; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += deltas(i, a) * deltas(i, c);
        moment(a, c) = s;
      }
    }
    std::vector<double> ev;
    Matrix vec;
    oracle::symmetric_eigen(moment, &ev, &vec);
    if (ev[m - 1] - ev[m] < 1e-3) continue;  // spectrum gap guard
    Matrix want(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) want(i, j) = vec(j, i);
    }
    CHECK(oracle::principal_angle(got.vectors(), want) < 1e-6);
  }
}

TEST_CASE("pca rejects insufficient rank") {
  std::vector<std::vector<double>> deltas = {{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}};
  CHECK_THROWS_AS((void)pca_top_components(deltas, 2), Error);
  CHECK_THROWS_AS((void)pca_top_components(deltas, 4), Error);
}

TEST_SUITE_END();
