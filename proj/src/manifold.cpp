#include "mdl/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdl/linalg.hpp"
#include "mdl/parallel.hpp"
#include "mdl/rng.hpp"

namespace mdl::manifold {

std::size_t AugmentConfig::effective_k(std::size_t m) const {
  return k_neighbors > 0 ? k_neighbors : std::max<std::size_t>(50, 2 * (m + 1));
}

void AugmentConfig::validate(std::size_t m) const {
  if (max_norm <= 0.0) throw Error::config("augment: max_norm must be positive");
  if (high_distance < max_norm) {
    throw Error::config("augment: high_distance must be >= max_norm");
  }
  if (effective_k(m) < m + 1) {
    throw Error::config("augment: k_neighbors must be at least m+1");
  }
}

std::vector<std::size_t> knn_same_class(const LabeledDataset& ds, std::size_t index,
                                        std::size_t k,
                                        const std::vector<std::size_t>& pool) {
  const std::size_t n = ds.ambient_dim;
  const std::uint8_t cls = ds.labels.at(index);
  const double* x = ds.points.row(index);

  std::vector<std::pair<double, std::size_t>> cand;
  auto consider = [&](std::size_t j) {
    if (j == index || ds.labels[j] != cls) return;
    const double* y = ds.points.row(j);
    double d = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double diff = x[t] - y[t];
      d += diff * diff;
    }
    cand.emplace_back(d, j);
  };
  if (pool.empty()) {
    for (std::size_t j = 0; j < ds.size(); ++j) consider(j);
  } else {
    for (std::size_t j : pool) consider(j);
  }
  if (cand.size() < k) {
    throw Error::data("knn_same_class: fewer same-class points than requested neighbors");
  }
  std::nth_element(cand.begin(), cand.begin() + k - 1, cand.end());
  std::sort(cand.begin(), cand.begin() + k);
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = cand[i].second;
  return out;
}

LocalChart infer_chart(const LabeledDataset& ds, std::size_t index, std::size_t m,
                       std::size_t k, const std::vector<std::size_t>& pool) {
  const std::size_t n = ds.ambient_dim;
  const std::vector<std::size_t> nbrs = knn_same_class(ds, index, k, pool);
  const double* x = ds.points.row(index);
  Matrix deltas(nbrs.size(), n);
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    const double* y = ds.points.row(nbrs[i]);
    for (std::size_t j = 0; j < n; ++j) deltas(i, j) = y[j] - x[j];
  }
  LocalChart chart;
  chart.base_point.assign(x, x + n);
  try {
    chart.tangent = linalg::pca_top_components(deltas, m);
  } catch (const Error& e) {
    throw Error::data(std::string("degenerate chart at point ") + std::to_string(index) +
                      ": " + e.what());
  }
  chart.normal = linalg::null_space_basis(chart.tangent);
  chart.source = ChartSource::inferred;
  return chart;
}

namespace {

// Canonical-frame direction rows -> orthonormal bases in the embedded space.
// head_tangent / head_normal are directions inside the canonical (m+1)-block;
// the remaining n - (m+1) trivial-embedding axes all belong to the normal
// space.
LocalChart map_canonical_chart(const LabeledDataset& ds, std::size_t index,
                               const std::vector<std::vector<double>>& head_tangent,
                               const std::vector<std::vector<double>>& head_normal) {
  const std::size_t n = ds.ambient_dim;
  const std::size_t head = ds.intrinsic_dim + 1;
  const std::size_t m = ds.intrinsic_dim;

  Matrix tangent(m, n);
  for (std::size_t i = 0; i < head_tangent.size(); ++i) {
    const std::vector<double> dir = ds.embedding.rotate_direction(head_tangent[i]);
    for (std::size_t j = 0; j < n; ++j) tangent(i, j) = dir[j];
  }
  Matrix normal(n - m, n);
  std::size_t row = 0;
  for (const auto& hn : head_normal) {
    const std::vector<double> dir = ds.embedding.rotate_direction(hn);
    for (std::size_t j = 0; j < n; ++j) normal(row, j) = dir[j];
    ++row;
  }
  for (std::size_t a = head; a < n; ++a, ++row) {
    // rotated trivial axis = column a of Q
    for (std::size_t j = 0; j < n; ++j) normal(row, j) = ds.embedding.rotation(j, a);
  }

  LocalChart chart;
  const double* x = ds.points.row(index);
  chart.base_point.assign(x, x + n);
  chart.tangent = OrthonormalBasis(std::move(tangent));
  chart.normal = OrthonormalBasis(std::move(normal));
  chart.source = ChartSource::analytic;
  return chart;
}

}  // namespace

LocalChart analytic_chart(const LabeledDataset& ds, std::size_t index) {
  if (ds.canonical_params.empty()) {
    throw Error::unsupported("analytic_chart: dataset carries no canonical parameters");
  }
  const std::size_t m = ds.intrinsic_dim;
  const std::size_t head = m + 1;
  const ManifoldDescriptor& desc = ds.descriptors.at(ds.labels.at(index));
  const std::vector<double>& param = ds.canonical_params.at(index);

  std::vector<std::vector<double>> head_tangent;
  std::vector<std::vector<double>> head_normal;

  if (desc.kind == ManifoldKind::sphere) {
    // normal is radial; tangent is its complement inside the canonical block
    std::vector<double> radial(head);
    for (std::size_t j = 0; j < head; ++j) {
      radial[j] = (param[j] - desc.center_canonical[j]) / desc.radius;
    }
    const double nrm = norm2(radial.data(), head);
    for (auto& v : radial) v /= nrm;
    Matrix rad(1, head);
    for (std::size_t j = 0; j < head; ++j) rad(0, j) = radial[j];
    OrthonormalBasis tangent_head =
        linalg::null_space_basis(OrthonormalBasis(std::move(rad)));
    for (std::size_t i = 0; i < m; ++i) {
      head_tangent.emplace_back(tangent_head.vector(i), tangent_head.vector(i) + head);
    }
    head_normal.push_back(radial);
  } else {
    const double phi = param[0];
    double dx, dy;
    if (desc.inner_parameterization) {
      dx = std::cos(phi) - (phi - desc.mu_offset) * std::sin(phi);
      dy = std::sin(phi) + (phi - desc.mu_offset) * std::cos(phi);
    } else {
      dx = std::sin(phi) + phi * std::cos(phi);
      dy = std::cos(phi) - phi * std::sin(phi);
    }
    const double nrm = std::sqrt(dx * dx + dy * dy);
    std::vector<double> dphi(head, 0.0);
    dphi[0] = dx / nrm;
    dphi[1] = dy / nrm;
    head_tangent.push_back(dphi);
    for (std::size_t j = 1; j < m; ++j) {  // psi axes
      std::vector<double> e(head, 0.0);
      e[1 + j] = 1.0;
      head_tangent.push_back(std::move(e));
    }
    std::vector<double> perp(head, 0.0);  // in-plane normal of the spiral
    perp[0] = -dphi[1];
    perp[1] = dphi[0];
    head_normal.push_back(std::move(perp));
  }

  return map_canonical_chart(ds, index, head_tangent, head_normal);
}

LocalChart chart_at(const LabeledDataset& ds, std::size_t index, std::size_t m,
                    const AugmentConfig& cfg, const std::vector<std::size_t>& pool) {
  if (cfg.chart_source == ChartSource::analytic) return analytic_chart(ds, index);
  return infer_chart(ds, index, m, cfg.effective_k(m), pool);
}

std::vector<double> build_distance_targets(std::size_t source_class, double delta_perp,
                                           std::size_t classes, double high_distance) {
  if (source_class >= classes) {
    throw Error::dimension("build_distance_targets: class index out of range");
  }
  if (delta_perp < 0.0 || delta_perp > high_distance) {
    throw Error::data("build_distance_targets: offset outside [0, high_distance]");
  }
  std::vector<double> t(classes, high_distance);
  t[source_class] = delta_perp;
  return t;
}

namespace {

// Uniform coefficients over a basis, normalized to a unit direction.
// A zero draw is retried once per the sampling contract.
std::vector<double> unit_combination(const OrthonormalBasis& basis, Rng& rng,
                                     bool symmetric) {
  const std::size_t n = basis.ambient_dim();
  std::vector<double> v(n, 0.0);
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = 0; i < basis.rank(); ++i) {
      const double c = symmetric ? rng.uniform(-1.0, 1.0) : rng.uniform();
      axpy(c, basis.vector(i), v.data(), n);
    }
    const double nrm = norm2(v.data(), n);
    if (nrm > 0.0) {
      for (auto& x : v) x /= nrm;
      return v;
    }
  }
  throw Error::numeric("sample_augmentation: zero-norm coefficient draw twice");
}

}  // namespace

AugmentedSample sample_augmentation(const LocalChart& chart, const AugmentConfig& cfg,
                                    std::size_t classes, std::size_t source_class,
                                    std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = chart.base_point.size();
  const std::vector<double> t_hat = unit_combination(chart.tangent, rng, cfg.symmetric_coeffs);
  const std::vector<double> n_hat = unit_combination(chart.normal, rng, cfg.symmetric_coeffs);
  const double dt = rng.uniform(0.0, cfg.effective_max_tangent());
  const double dn = rng.uniform(0.0, cfg.max_norm);

  AugmentedSample s;
  s.point = chart.base_point;
  axpy(dt, t_hat.data(), s.point.data(), n);
  axpy(dn, n_hat.data(), s.point.data(), n);
  s.source_class = source_class;
  s.tangent_offset = dt;
  s.normal_offset = dn;
  s.targets = build_distance_targets(source_class, dn, classes, cfg.high_distance);
  return s;
}

TrainingSet build_training_set(const LabeledDataset& ds, const AugmentConfig& cfg,
                               std::size_t n_on, std::size_t n_off, std::uint64_t seed,
                               const std::vector<std::size_t>& pool) {
  cfg.validate(ds.intrinsic_dim);
  const std::size_t C = ds.classes;
  const std::size_t n = ds.ambient_dim;

  std::vector<std::vector<std::size_t>> class_pool(C);
  if (pool.empty()) {
    for (std::size_t i = 0; i < ds.size(); ++i) class_pool[ds.labels[i]].push_back(i);
  } else {
    for (std::size_t i : pool) class_pool[ds.labels.at(i)].push_back(i);
  }

  std::vector<std::size_t> on_per_class(C, n_on / C);
  std::vector<std::size_t> off_per_class(C, n_off / C);
  for (std::size_t c = 0; c < n_on % C; ++c) ++on_per_class[c];
  for (std::size_t c = 0; c < n_off % C; ++c) ++off_per_class[c];

  for (std::size_t c = 0; c < C; ++c) {
    if (on_per_class[c] > class_pool[c].size()) {
      throw Error::data("build_training_set: class " + std::to_string(c) +
                        " has only " + std::to_string(class_pool[c].size()) +
                        " manifold samples for " + std::to_string(on_per_class[c]) +
                        " on-manifold rows; regenerate the dataset with more points");
    }
    if (!class_pool[c].empty() && off_per_class[c] > 0 &&
        class_pool[c].size() <= ds.intrinsic_dim) {
      throw Error::data("build_training_set: not enough base points for charts");
    }
  }

  const std::size_t total = n_on + n_off;
  TrainingSet ts;
  ts.points = Matrix(total, n);
  ts.targets = Matrix(total, C);
  ts.labels.resize(total);
  ts.on_manifold.resize(total);
  ts.classes = C;

  std::size_t row0 = 0;
  const std::uint64_t aug_seed = derive_seed(seed, streams::augment);
  for (std::size_t c = 0; c < C; ++c) {
    const auto& cpool = class_pool[c];

    // on-manifold rows: zero distance to the own class
    const std::vector<double> on_targets =
        build_distance_targets(c, 0.0, C, cfg.high_distance);
    for (std::size_t i = 0; i < on_per_class[c]; ++i) {
      const double* src = ds.points.row(cpool[i]);
      std::copy(src, src + n, ts.points.row(row0 + i));
      std::copy(on_targets.begin(), on_targets.end(), ts.targets.row(row0 + i));
      ts.labels[row0 + i] = static_cast<std::uint8_t>(c);
      ts.on_manifold[row0 + i] = 1;
    }
    row0 += on_per_class[c];

    // augmented rows: round-robin over base points, one cached chart each
    const std::size_t n_bases = std::min(cpool.size(), off_per_class[c]);
    std::vector<LocalChart> charts(n_bases);
    parallel_for(n_bases, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        charts[i] = chart_at(ds, cpool[i], ds.intrinsic_dim, cfg, pool);
      }
    });

    const std::uint64_t class_seed = derive_seed(aug_seed, c);
    const std::size_t base_row = row0;
    parallel_for(off_per_class[c], [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        const LocalChart& chart = charts[j % n_bases];
        AugmentedSample s =
            sample_augmentation(chart, cfg, C, c, derive_seed(class_seed, j));
        std::copy(s.point.begin(), s.point.end(), ts.points.row(base_row + j));
        std::copy(s.targets.begin(), s.targets.end(), ts.targets.row(base_row + j));
        ts.labels[base_row + j] = static_cast<std::uint8_t>(c);
        ts.on_manifold[base_row + j] = 0;
      }
    });
    row0 += off_per_class[c];
  }

  // deterministic shuffle
  Rng shuffle_rng(derive_seed(seed, streams::shuffle));
  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = total; i > 1; --i) {
    std::swap(perm[i - 1], perm[shuffle_rng.index(i)]);
  }
  TrainingSet shuffled;
  shuffled.points = Matrix(total, n);
  shuffled.targets = Matrix(total, C);
  shuffled.labels.resize(total);
  shuffled.on_manifold.resize(total);
  shuffled.classes = C;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t src = perm[i];
    std::copy(ts.points.row(src), ts.points.row(src) + n, shuffled.points.row(i));
    std::copy(ts.targets.row(src), ts.targets.row(src) + C, shuffled.targets.row(i));
    shuffled.labels[i] = ts.labels[src];
    shuffled.on_manifold[i] = ts.on_manifold[src];
  }
  return shuffled;
}

}  // namespace mdl::manifold
