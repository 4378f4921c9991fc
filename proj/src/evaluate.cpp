#include "mdl/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mdl/linalg.hpp"

namespace mdl::eval {

ClassificationOutcome classify_distances(const double* d, std::size_t c,
                                         std::optional<double> tol) {
  if (c == 0) throw Error::dimension("classify_distances: no classes");
  ClassificationOutcome out;
  std::size_t best = 0;
  for (std::size_t i = 1; i < c; ++i) {
    if (d[i] < d[best]) best = i;  // strict: ties stay at the lower index
  }
  out.argmin_class = best;
  out.min_distance = d[best];
  out.decision = static_cast<int>(best);
  if (tol && out.min_distance > *tol) out.decision = kOutOfDomain;
  return out;
}

ClassificationOutcome classify_distances(const std::vector<double>& d,
                                         std::optional<double> tol) {
  return classify_distances(d.data(), d.size(), tol);
}

int decide(const double* outputs, std::size_t classes, const Rule& rule) {
  if (rule.distance_rule) {
    return classify_distances(outputs, classes, rule.tol).decision;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < classes; ++i) {
    if (outputs[i] > outputs[best]) best = i;
  }
  return static_cast<int>(best);
}

namespace {

constexpr std::size_t kEvalBatch = 4096;

// batched eval-mode forward over a whole point set
void forward_all(const nn::Model& model, const Matrix& points, Matrix* out) {
  const std::size_t N = points.rows();
  const std::size_t n = points.cols();
  *out = Matrix(N, model.cfg.classes);
  nn::ForwardCache cache;
  for (std::size_t start = 0; start < N; start += kEvalBatch) {
    const std::size_t b = std::min(kEvalBatch, N - start);
    Matrix xb(b, n);
    for (std::size_t i = 0; i < b; ++i) {
      std::copy(points.row(start + i), points.row(start + i) + n, xb.row(i));
    }
    const Matrix& y = nn::forward(model, xb, &cache);
    for (std::size_t i = 0; i < b; ++i) {
      std::copy(y.row(i), y.row(i) + y.cols(), out->row(start + i));
    }
  }
}

}  // namespace

double distance_test_loss(const nn::Model& model, const manifold::TrainingSet& testset) {
  if (testset.size() == 0) throw Error::data("distance_test_loss: empty test set");
  Matrix pred;
  forward_all(model, testset.points, &pred);
  double s = 0.0;
  const std::size_t total = pred.rows() * pred.cols();
  for (std::size_t i = 0; i < total; ++i) {
    const double d = pred.data()[i] - testset.targets.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(total);
}

double classification_error(const nn::Model& model, const Matrix& points,
                            const std::vector<std::uint8_t>& labels, const Rule& rule) {
  if (points.rows() != labels.size()) {
    throw Error::dimension("classification_error: points/labels mismatch");
  }
  if (points.rows() == 0) throw Error::data("classification_error: empty test set");
  Matrix pred;
  forward_all(model, points, &pred);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const int d = decide(pred.row(i), pred.cols(), rule);
    if (d != static_cast<int>(labels[i])) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(points.rows());
}

double SliceGrid::u_at(std::size_t iu) const {
  return res_u > 1 ? u_lo + (u_hi - u_lo) * static_cast<double>(iu) /
                                static_cast<double>(res_u - 1)
                   : u_lo;
}

double SliceGrid::v_at(std::size_t iv) const {
  return res_v > 1 ? v_lo + (v_hi - v_lo) * static_cast<double>(iv) /
                                static_cast<double>(res_v - 1)
                   : v_lo;
}

PlaneSpec default_plane(const LabeledDataset& ds, double u_lo, double u_hi,
                        double v_lo, double v_hi) {
  PlaneSpec p;
  const std::size_t head = ds.intrinsic_dim + 1;
  std::vector<double> center(head, 0.0);
  if (ds.descriptors[0].kind == ManifoldKind::sphere) {
    center = ds.descriptors[0].center_canonical;
  } else {
    // rolls are centered near the origin of the spiral plane; use psi midpoints
    for (std::size_t j = 2; j < head; ++j) {
      center[j] = 0.5 * (ds.descriptors[0].psi_lo + ds.descriptors[0].psi_hi);
    }
  }
  p.origin = ds.embedding.to_normalized(center);
  std::vector<double> e0(head, 0.0), e1(head, 0.0);
  e0[0] = 1.0;
  e1[1] = 1.0;
  p.dir_u = ds.embedding.rotate_direction(e0);
  p.dir_v = ds.embedding.rotate_direction(e1);
  p.u_lo = u_lo;
  p.u_hi = u_hi;
  p.v_lo = v_lo;
  p.v_hi = v_hi;
  return p;
}

SliceGrid build_slice_grid(const PlaneSpec& plane, std::size_t res_u, std::size_t res_v) {
  if (res_u < 1 || res_v < 1) throw Error::dimension("slice grid: resolution must be >= 1");
  const std::size_t n = plane.origin.size();
  if (plane.dir_u.size() != n || plane.dir_v.size() != n) {
    throw Error::dimension("slice grid: direction dimension mismatch");
  }

  SliceGrid g;
  g.origin = plane.origin;
  g.axis_u = plane.dir_u;
  const double nu = norm2(g.axis_u.data(), n);
  if (nu < 1e-12) throw Error::data("slice grid: degenerate u direction");
  for (auto& x : g.axis_u) x /= nu;
  g.axis_v = plane.dir_v;
  const double proj = dot(g.axis_v.data(), g.axis_u.data(), n);
  axpy(-proj, g.axis_u.data(), g.axis_v.data(), n);
  const double nv = norm2(g.axis_v.data(), n);
  if (nv < 1e-9) throw Error::data("slice grid: directions are dependent");
  for (auto& x : g.axis_v) x /= nv;

  g.u_lo = plane.u_lo;
  g.u_hi = plane.u_hi;
  g.v_lo = plane.v_lo;
  g.v_hi = plane.v_hi;
  g.res_u = res_u;
  g.res_v = res_v;
  g.nodes = Matrix(res_u * res_v, n);
  for (std::size_t iu = 0; iu < res_u; ++iu) {
    const double u = g.u_at(iu);
    for (std::size_t iv = 0; iv < res_v; ++iv) {
      const double v = g.v_at(iv);
      double* row = g.nodes.row(g.node_index(iu, iv));
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = g.origin[j] + u * g.axis_u[j] + v * g.axis_v[j];
      }
    }
  }
  return g;
}

void evaluate_grid(const nn::Model& model, SliceGrid* grid, const Rule& rule) {
  if (model.train_mode) throw Error::unsupported("evaluate_grid: model must be in eval mode");
  forward_all(model, grid->nodes, &grid->values);
  grid->decisions.resize(grid->nodes.rows());
  for (std::size_t i = 0; i < grid->nodes.rows(); ++i) {
    grid->decisions[i] = decide(grid->values.row(i), grid->values.cols(), rule);
  }
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error::data("cannot write " + path);
  f << "dataset,m,n,model,train_mse,test_mse,test_count,clf_error\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%s,%.12g,%.12g,%zu,%.12g\n",
                  r.dataset.c_str(), r.m, r.n, r.model.c_str(), r.train_mse, r.test_mse,
                  r.test_count, r.clf_error);
    f << buf;
  }
}

void write_grid_csv(const SliceGrid& grid, const std::string& path, bool with_coords,
                    std::optional<double> clip_above) {
  std::ofstream f(path);
  if (!f) throw Error::data("cannot write " + path);
  const std::size_t n = grid.nodes.cols();
  const std::size_t c = grid.values.cols();
  f << "# plane origin=";
  for (std::size_t j = 0; j < n; ++j) f << (j ? " " : "") << grid.origin[j];
  f << " extent=[" << grid.u_lo << "," << grid.u_hi << "]x[" << grid.v_lo << ","
    << grid.v_hi << "] res=" << grid.res_u << "x" << grid.res_v << "\n";
  f << "u,v";
  if (with_coords) {
    for (std::size_t j = 0; j < n; ++j) f << ",x_" << j;
  }
  for (std::size_t k = 0; k < c; ++k) f << ",val_" << k;
  f << ",decision\n";
  char buf[64];
  for (std::size_t iu = 0; iu < grid.res_u; ++iu) {
    for (std::size_t iv = 0; iv < grid.res_v; ++iv) {
      const std::size_t i = grid.node_index(iu, iv);
      std::snprintf(buf, sizeof(buf), "%.12g,%.12g", grid.u_at(iu), grid.v_at(iv));
      f << buf;
      if (with_coords) {
        for (std::size_t j = 0; j < n; ++j) {
          std::snprintf(buf, sizeof(buf), ",%.12g", grid.nodes(i, j));
          f << buf;
        }
      }
      for (std::size_t k = 0; k < c; ++k) {
        const double v = grid.values(i, k);
        if (clip_above && v > *clip_above) {
          f << ",";
        } else {
          std::snprintf(buf, sizeof(buf), ",%.12g", v);
          f << buf;
        }
      }
      if (grid.decisions[i] == kOutOfDomain) {
        f << ",out_of_domain\n";
      } else {
        f << "," << grid.decisions[i] << "\n";
      }
    }
  }
}

void write_grid_ppm(const SliceGrid& grid, const std::string& path, std::size_t channel) {
  if (channel >= grid.values.cols()) throw Error::dimension("ppm: channel out of range");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error::data("cannot write " + path);
  double lo = grid.values(0, channel), hi = lo;
  for (std::size_t i = 0; i < grid.values.rows(); ++i) {
    lo = std::min(lo, grid.values(i, channel));
    hi = std::max(hi, grid.values(i, channel));
  }
  const double span = hi > lo ? hi - lo : 1.0;
  f << "P6\n" << grid.res_u << " " << grid.res_v << "\n255\n";
  // rows top-to-bottom follow decreasing v so the image matches plot axes
  for (std::size_t row = 0; row < grid.res_v; ++row) {
    const std::size_t iv = grid.res_v - 1 - row;
    for (std::size_t iu = 0; iu < grid.res_u; ++iu) {
      const double t = (grid.values(grid.node_index(iu, iv), channel) - lo) / span;
      // blue -> white -> red ramp
      unsigned char rgb[3];
      if (t < 0.5) {
        const double s = t * 2.0;
        rgb[0] = static_cast<unsigned char>(255 * s);
        rgb[1] = static_cast<unsigned char>(255 * s);
        rgb[2] = 255;
      } else {
        const double s = (t - 0.5) * 2.0;
        rgb[0] = 255;
        rgb[1] = static_cast<unsigned char>(255 * (1.0 - s));
        rgb[2] = static_cast<unsigned char>(255 * (1.0 - s));
      }
      f.write(reinterpret_cast<const char*>(rgb), 3);
    }
  }
}

}  // namespace mdl::eval
