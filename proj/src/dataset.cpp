#include "mdl/dataset.hpp"

#include <cmath>

namespace mdl {

std::string to_string(ManifoldKind k) {
  return k == ManifoldKind::sphere ? "sphere" : "swiss_roll";
}

ManifoldKind manifold_kind_from_string(const std::string& s) {
  if (s == "sphere") return ManifoldKind::sphere;
  if (s == "swiss_roll") return ManifoldKind::swiss_roll;
  throw Error::data("unknown manifold kind: " + s);
}

void ManifoldDescriptor::validate() const {
  if (kind == ManifoldKind::sphere) {
    if (radius <= 0.0) throw Error::data("sphere radius must be positive");
  } else {
    if (!(phi_hi > phi_lo)) throw Error::data("swiss roll phi range is degenerate");
  }
}

std::vector<double> EmbeddingRecord::to_normalized(const std::vector<double>& p) const {
  const std::size_t n = rotation.rows();
  std::vector<double> padded(n, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) padded[i] = p[i];
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += rotation(i, j) * padded[j];
    out[i] = cube_scale * (s + translation[i]) + cube_offset[i];
  }
  return out;
}

std::vector<double> EmbeddingRecord::to_isometric(const std::vector<double>& x) const {
  const std::size_t n = rotation.rows();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - cube_offset[i]) / cube_scale;
  return out;
}

std::vector<double> EmbeddingRecord::to_canonical_frame(const std::vector<double>& x) const {
  const std::size_t n = rotation.rows();
  const std::vector<double> iso = to_isometric(x);
  std::vector<double> out(n, 0.0);
  // Q^T (iso - T)
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += rotation(j, i) * (iso[j] - translation[j]);
    out[i] = s;
  }
  return out;
}

std::vector<double> EmbeddingRecord::rotate_direction(const std::vector<double>& d) const {
  const std::size_t n = rotation.rows();
  std::vector<double> padded(n, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) padded[i] = d[i];
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += rotation(i, j) * padded[j];
    out[i] = s;
  }
  return out;
}

std::size_t LabeledDataset::class_count(std::size_t c) const {
  std::size_t k = 0;
  for (auto l : labels) {
    if (l == c) ++k;
  }
  return k;
}

std::vector<std::size_t> LabeledDataset::class_indices(std::size_t c) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == c) idx.push_back(i);
  }
  return idx;
}

void LabeledDataset::validate() const {
  if (points.rows() != labels.size()) {
    throw Error::dimension("dataset points/labels size mismatch");
  }
  if (classes == 0 || descriptors.size() != classes) {
    throw Error::data("dataset class descriptor mismatch");
  }
  for (auto l : labels) {
    if (l >= classes) throw Error::data("label out of range");
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (class_count(c) == 0) throw Error::data("empty class in dataset");
  }
  for (double v : points.values()) {
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) {
      throw Error::data("normalized coordinate outside the unit cube");
    }
  }
}

}  // namespace mdl
