#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdl/matrix.hpp"

namespace mdl {

enum class ManifoldKind { sphere, swiss_roll };

std::string to_string(ManifoldKind k);
ManifoldKind manifold_kind_from_string(const std::string& s);

// Geometry of one class manifold in canonical (m+1)-dimensional coordinates.
struct ManifoldDescriptor {
  ManifoldKind kind = ManifoldKind::sphere;
  // sphere
  std::vector<double> center_canonical;
  double radius = 0.0;
  // swiss roll: mu_offset = 0 for the outer roll, mu for the inner one.
  // The inner roll swaps to ((phi-mu) cos phi, (phi-mu) sin phi).
  double mu_offset = 0.0;
  bool inner_parameterization = false;
  double phi_lo = 0.0, phi_hi = 0.0;
  double psi_lo = 0.0, psi_hi = 0.0;

  void validate() const;
};

// Record of the trivial-embed + isometry + unit-cube normalization chain.
// normalized = cube_scale * (Q * padded + T) + cube_offset
struct EmbeddingRecord {
  Matrix rotation;                 // n x n orthogonal
  std::vector<double> translation; // n
  double cube_scale = 1.0;
  std::vector<double> cube_offset; // n

  std::vector<double> to_normalized(const std::vector<double>& canonical_point) const;
  std::vector<double> to_isometric(const std::vector<double>& normalized) const;   // undo cube
  std::vector<double> to_canonical_frame(const std::vector<double>& normalized) const;  // undo cube + isometry (full n-vector)
  // Directions only transform through the rotation; scale does not change them.
  std::vector<double> rotate_direction(const std::vector<double>& padded_dir) const;
};

// N labeled points in normalized coordinates, plus everything needed to
// recover the generating geometry.
struct LabeledDataset {
  Matrix points;                 // N x n, coordinates in [0,1]
  std::vector<std::uint8_t> labels;
  std::size_t intrinsic_dim = 0;  // m
  std::size_t ambient_dim = 0;    // n
  std::size_t classes = 0;        // C
  std::vector<ManifoldDescriptor> descriptors;  // one per class
  EmbeddingRecord embedding;
  std::uint64_t seed = 0;
  std::string kind_name;
  // Per-point canonical parameters: spheres store the canonical (m+1)
  // coordinates, swiss rolls store (phi, psi_1..psi_{m-1}).
  std::vector<std::vector<double>> canonical_params;

  std::size_t size() const { return points.rows(); }
  std::size_t class_count(std::size_t c) const;
  std::vector<std::size_t> class_indices(std::size_t c) const;
  void validate() const;
};

}  // namespace mdl
