#include "mdl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mdl/gemm.hpp"
#include "mdl/linalg.hpp"
#include "mdl/parallel.hpp"
#include "mdl/rng.hpp"

namespace mdl::datagen {

namespace {

constexpr double kSeparatedCenterDistance = 2.5;
constexpr double kConcentricInnerRadius = 1.0;
constexpr double kConcentricOuterRadius = 1.3;
constexpr double kRollPhiLo = 1.5;
constexpr double kRollPhiHi = 4.5;
constexpr double kRollPsiLo = 0.0;
constexpr double kRollPsiHi = 21.0;
constexpr double kRollMu = 1.0;

std::vector<double> random_unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double nrm = 0.0;
  do {
    for (auto& x : v) x = rng.normal();
    nrm = norm2(v.data(), dim);
  } while (nrm == 0.0);
  for (auto& x : v) x /= nrm;
  return v;
}

void roll_xy(const ManifoldDescriptor& d, double phi, double* x, double* y) {
  if (d.inner_parameterization) {
    *x = (phi - d.mu_offset) * std::cos(phi);
    *y = (phi - d.mu_offset) * std::sin(phi);
  } else {
    *x = phi * std::sin(phi);
    *y = phi * std::cos(phi);
  }
}

struct BuildResult {
  Matrix canonical;  // N x (m+1)
  std::vector<std::uint8_t> labels;
  std::vector<std::vector<double>> params;
};

LabeledDataset assemble(const std::string& kind, std::size_t m, std::size_t n,
                        std::uint64_t seed, BuildResult&& built,
                        std::vector<ManifoldDescriptor> descriptors) {
  if (n <= m) throw Error::dimension("ambient dimension must exceed intrinsic dimension");

  LabeledDataset ds;
  ds.kind_name = kind;
  ds.intrinsic_dim = m;
  ds.ambient_dim = n;
  ds.classes = descriptors.size();
  ds.descriptors = std::move(descriptors);
  ds.seed = seed;
  ds.labels = std::move(built.labels);
  ds.canonical_params = std::move(built.params);

  for (auto& d : ds.descriptors) d.validate();

  Matrix trivial = embed_trivial(built.canonical, n);
  Matrix q = linalg::random_orthogonal(n, derive_seed(seed, streams::rotation));
  Rng trng(derive_seed(seed, streams::translation));
  std::vector<double> t(n);
  for (auto& x : t) x = trng.normal();

  Matrix iso = apply_isometry(trivial, q, t);
  CubeNormalization norm = normalize_to_unit_cube(iso);

  ds.points = std::move(norm.points);
  ds.embedding.rotation = std::move(q);
  ds.embedding.translation = std::move(t);
  ds.embedding.cube_scale = norm.scale;
  ds.embedding.cube_offset = std::move(norm.offset);
  ds.validate();
  return ds;
}

}  // namespace

Matrix sample_sphere_points(std::size_t m, double radius,
                            const std::vector<double>& center,
                            std::size_t count, std::uint64_t seed) {
  if (count == 0) throw Error::data("sample_sphere_points: empty dataset requested");
  if (radius <= 0.0) throw Error::data("sample_sphere_points: radius must be positive");
  const std::size_t dim = m + 1;
  if (center.size() != dim) {
    throw Error::dimension("sample_sphere_points: center dimension != m+1");
  }
  Matrix out(count, dim);
  parallel_for(count, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Rng rng(derive_seed(seed, i));
      double* row = out.row(i);
      double nrm = 0.0;
      do {
        for (std::size_t j = 0; j < dim; ++j) row[j] = rng.normal();
        nrm = norm2(row, dim);
      } while (nrm == 0.0);
      for (std::size_t j = 0; j < dim; ++j) row[j] = radius * row[j] / nrm + center[j];
    }
  });
  return out;
}

namespace {

BuildResult build_two_spheres(std::size_t m, std::size_t count_per_class,
                              std::uint64_t seed,
                              const std::vector<double>& c0, double r0,
                              const std::vector<double>& c1, double r1) {
  const std::size_t dim = m + 1;
  const std::uint64_t ps = derive_seed(seed, streams::points);
  Matrix a = sample_sphere_points(m, r0, c0, count_per_class, derive_seed(ps, 0));
  Matrix b = sample_sphere_points(m, r1, c1, count_per_class, derive_seed(ps, 1));

  BuildResult out;
  out.canonical = Matrix(2 * count_per_class, dim);
  out.labels.resize(2 * count_per_class);
  out.params.resize(2 * count_per_class);
  for (std::size_t i = 0; i < count_per_class; ++i) {
    for (std::size_t j = 0; j < dim; ++j) out.canonical(i, j) = a(i, j);
    out.labels[i] = 0;
    out.params[i].assign(a.row(i), a.row(i) + dim);
  }
  for (std::size_t i = 0; i < count_per_class; ++i) {
    const std::size_t k = count_per_class + i;
    for (std::size_t j = 0; j < dim; ++j) out.canonical(k, j) = b(i, j);
    out.labels[k] = 1;
    out.params[k].assign(b.row(i), b.row(i) + dim);
  }
  return out;
}

}  // namespace

LabeledDataset make_separated_spheres(std::size_t m, std::size_t n,
                                      std::size_t count_per_class, std::uint64_t seed) {
  const std::size_t dim = m + 1;
  Rng crng(derive_seed(seed, streams::centers));
  std::vector<double> c0(dim);
  for (auto& x : c0) x = crng.normal();
  std::vector<double> dir = random_unit_vector(crng, dim);
  std::vector<double> c1 = c0;
  axpy(kSeparatedCenterDistance, dir.data(), c1.data(), dim);

  ManifoldDescriptor d0;
  d0.kind = ManifoldKind::sphere;
  d0.center_canonical = c0;
  d0.radius = 1.0;
  ManifoldDescriptor d1 = d0;
  d1.center_canonical = c1;

  return assemble("separated_spheres", m, n, seed,
                  build_two_spheres(m, count_per_class, seed, c0, 1.0, c1, 1.0),
                  {d0, d1});
}

LabeledDataset make_concentric_spheres(std::size_t m, std::size_t n,
                                       std::size_t count_per_class, std::uint64_t seed) {
  const std::size_t dim = m + 1;
  Rng crng(derive_seed(seed, streams::centers));
  std::vector<double> c(dim);
  for (auto& x : c) x = crng.normal();

  ManifoldDescriptor d0;
  d0.kind = ManifoldKind::sphere;
  d0.center_canonical = c;
  d0.radius = kConcentricInnerRadius;
  ManifoldDescriptor d1 = d0;
  d1.radius = kConcentricOuterRadius;

  return assemble("concentric_spheres", m, n, seed,
                  build_two_spheres(m, count_per_class, seed, c, d0.radius, c, d1.radius),
                  {d0, d1});
}

LabeledDataset make_swiss_rolls(std::size_t m, std::size_t n,
                                std::size_t count_per_class, std::uint64_t seed) {
  if (count_per_class == 0) throw Error::data("make_swiss_rolls: empty dataset requested");
  const std::size_t dim = m + 1;

  ManifoldDescriptor outer;
  outer.kind = ManifoldKind::swiss_roll;
  outer.mu_offset = 0.0;
  outer.inner_parameterization = false;
  outer.phi_lo = kRollPhiLo;
  outer.phi_hi = kRollPhiHi;
  outer.psi_lo = kRollPsiLo;
  outer.psi_hi = kRollPsiHi;
  ManifoldDescriptor inner = outer;
  inner.mu_offset = kRollMu;
  inner.inner_parameterization = true;

  BuildResult built;
  built.canonical = Matrix(2 * count_per_class, dim);
  built.labels.resize(2 * count_per_class);
  built.params.resize(2 * count_per_class);

  const std::uint64_t ps = derive_seed(seed, streams::points);
  const ManifoldDescriptor* descs[2] = {&outer, &inner};
  parallel_for(2 * count_per_class, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const std::size_t cls = i / count_per_class;
      Rng rng(derive_seed(derive_seed(ps, cls), i % count_per_class));
      const double phi = rng.uniform(kRollPhiLo, kRollPhiHi);
      std::vector<double> param(m);
      param[0] = phi;
      double x, y;
      roll_xy(*descs[cls], phi, &x, &y);
      built.canonical(i, 0) = x;
      built.canonical(i, 1) = y;
      for (std::size_t j = 1; j < m; ++j) {
        param[j] = rng.uniform(kRollPsiLo, kRollPsiHi);
        built.canonical(i, 1 + j) = param[j];
      }
      built.labels[i] = static_cast<std::uint8_t>(cls);
      built.params[i] = std::move(param);
    }
  });

  return assemble("swiss_rolls", m, n, seed, std::move(built), {outer, inner});
}

LabeledDataset make_dataset(const std::string& kind, std::size_t m, std::size_t n,
                            std::size_t count_per_class, std::uint64_t seed) {
  if (kind == "separated_spheres") return make_separated_spheres(m, n, count_per_class, seed);
  if (kind == "concentric_spheres") return make_concentric_spheres(m, n, count_per_class, seed);
  if (kind == "swiss_rolls") return make_swiss_rolls(m, n, count_per_class, seed);
  throw Error::config("unknown dataset kind: " + kind);
}

Matrix embed_trivial(const Matrix& points, std::size_t n) {
  if (n < points.cols()) {
    throw Error::dimension("embed_trivial: target dimension below canonical dimension");
  }
  Matrix out(points.rows(), n);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double* src = points.row(i);
    double* dst = out.row(i);
    for (std::size_t j = 0; j < points.cols(); ++j) dst[j] = src[j];
  }
  return out;
}

Matrix apply_isometry(const Matrix& points, const Matrix& q,
                      const std::vector<double>& t) {
  const std::size_t n = q.rows();
  if (q.cols() != n || points.cols() != n || t.size() != n) {
    throw Error::dimension("apply_isometry: dimension mismatch");
  }
  Matrix out(points.rows(), n);
  // rows are points: out = P Q^T, then + T
  dgemm(false, true, points.rows(), n, n, 1.0, points.data(), n, q.data(), n,
        0.0, out.data(), n);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* row = out.row(i);
    for (std::size_t j = 0; j < n; ++j) row[j] += t[j];
  }
  return out;
}

CubeNormalization normalize_to_unit_cube(const Matrix& points) {
  if (points.rows() == 0) throw Error::data("normalize_to_unit_cube: empty point set");
  const std::size_t n = points.cols();
  std::vector<double> lo(n, std::numeric_limits<double>::infinity());
  std::vector<double> hi(n, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double* row = points.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      lo[j] = std::min(lo[j], row[j]);
      hi[j] = std::max(hi[j], row[j]);
    }
  }
  double extent = 0.0;
  for (std::size_t j = 0; j < n; ++j) extent = std::max(extent, hi[j] - lo[j]);
  if (extent <= 0.0) throw Error::data("normalize_to_unit_cube: degenerate extent");

  CubeNormalization out;
  out.scale = 1.0 / extent;
  out.offset.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.offset[j] = -out.scale * lo[j];
  out.points = Matrix(points.rows(), n);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double* src = points.row(i);
    double* dst = out.points.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::clamp(out.scale * src[j] + out.offset[j], 0.0, 1.0);
    }
  }
  return out;
}

namespace {

double roll_plane_distance_sq(const ManifoldDescriptor& d, double px, double py) {
  // 1-D minimization over phi: coarse grid, then golden-section refinement
  // around the best cell.
  const int grid = 2048;
  double best = std::numeric_limits<double>::infinity();
  double best_phi = d.phi_lo;
  for (int i = 0; i <= grid; ++i) {
    const double phi = d.phi_lo + (d.phi_hi - d.phi_lo) * i / grid;
    double x, y;
    roll_xy(d, phi, &x, &y);
    const double dist = (px - x) * (px - x) + (py - y) * (py - y);
    if (dist < best) {
      best = dist;
      best_phi = phi;
    }
  }
  const double h = (d.phi_hi - d.phi_lo) / grid;
  double a = std::max(d.phi_lo, best_phi - h);
  double b = std::min(d.phi_hi, best_phi + h);
  const double gr = 0.6180339887498949;
  for (int it = 0; it < 80; ++it) {
    const double c1 = b - gr * (b - a);
    const double c2 = a + gr * (b - a);
    double x, y;
    roll_xy(d, c1, &x, &y);
    const double f1 = (px - x) * (px - x) + (py - y) * (py - y);
    roll_xy(d, c2, &x, &y);
    const double f2 = (px - x) * (px - x) + (py - y) * (py - y);
    if (f1 < f2) {
      b = c2;
    } else {
      a = c1;
    }
  }
  double x, y;
  roll_xy(d, 0.5 * (a + b), &x, &y);
  return std::min(best, (px - x) * (px - x) + (py - y) * (py - y));
}

}  // namespace

double true_manifold_distance(const LabeledDataset& ds, std::size_t cls,
                              const std::vector<double>& normalized_point) {
  const ManifoldDescriptor& d = ds.descriptors.at(cls);
  const std::vector<double> q = ds.embedding.to_canonical_frame(normalized_point);
  const std::size_t head = ds.intrinsic_dim + 1;

  double tail_sq = 0.0;
  for (std::size_t j = head; j < q.size(); ++j) tail_sq += q[j] * q[j];

  double head_sq = 0.0;
  if (d.kind == ManifoldKind::sphere) {
    double rad = 0.0;
    for (std::size_t j = 0; j < head; ++j) {
      const double diff = q[j] - d.center_canonical[j];
      rad += diff * diff;
    }
    const double dr = std::sqrt(rad) - d.radius;
    head_sq = dr * dr;
  } else {
    head_sq = roll_plane_distance_sq(d, q[0], q[1]);
    for (std::size_t j = 2; j < head; ++j) {
      const double c = std::clamp(q[j], d.psi_lo, d.psi_hi);
      head_sq += (q[j] - c) * (q[j] - c);
    }
  }
  return ds.embedding.cube_scale * std::sqrt(head_sq + tail_sq);
}

double analytic_interclass_gap(const LabeledDataset& ds) {
  if (ds.classes != 2) throw Error::data("interclass gap defined for two classes");
  const ManifoldDescriptor& a = ds.descriptors[0];
  const ManifoldDescriptor& b = ds.descriptors[1];
  double gap = 0.0;
  if (a.kind == ManifoldKind::sphere) {
    double cd = 0.0;
    for (std::size_t j = 0; j < a.center_canonical.size(); ++j) {
      const double diff = a.center_canonical[j] - b.center_canonical[j];
      cd += diff * diff;
    }
    cd = std::sqrt(cd);
    if (cd < 1e-12) {
      gap = std::fabs(a.radius - b.radius);  // concentric shells
    } else {
      gap = std::max(0.0, cd - a.radius - b.radius);
    }
  } else {
    // curve-to-curve search in the spiral plane (psi ranges coincide)
    const int grid = 1024;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= grid; ++i) {
      const double phi = a.phi_lo + (a.phi_hi - a.phi_lo) * i / grid;
      double x, y;
      roll_xy(a, phi, &x, &y);
      best = std::min(best, roll_plane_distance_sq(b, x, y));
    }
    gap = std::sqrt(best);
  }
  return gap * ds.embedding.cube_scale;
}

}  // namespace mdl::datagen
