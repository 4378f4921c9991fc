#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mdl/dataset.hpp"

namespace mdl::manifold {

enum class ChartSource { inferred, analytic };

// Local first-order model of a class manifold at a base point: orthonormal
// tangent and normal bases of the embedded space.
struct LocalChart {
  std::vector<double> base_point;
  OrthonormalBasis tangent;  // m x n
  OrthonormalBasis normal;   // (n-m) x n
  ChartSource source = ChartSource::inferred;
};

struct AugmentConfig {
  double max_tangent = 0.0;  // 0 -> defaults to max_norm
  double max_norm = 0.0;
  double high_distance = 1.0;
  std::size_t k_neighbors = 0;  // 0 -> max(50, 2(m+1))
  ChartSource chart_source = ChartSource::inferred;
  bool symmetric_coeffs = false;  // sample basis coefficients on [-1,1]

  double effective_max_tangent() const { return max_tangent > 0.0 ? max_tangent : max_norm; }
  std::size_t effective_k(std::size_t m) const;
  void validate(std::size_t m) const;
};

// One off-manifold training point with its known normal offset and the
// C-vector of distance targets.
struct AugmentedSample {
  std::vector<double> point;
  std::size_t source_class = 0;
  double normal_offset = 0.0;   // distance target for the source class
  double tangent_offset = 0.0;
  std::vector<double> targets;
};

/// Exact k nearest same-class neighbors of dataset point `index` by
/// Euclidean distance, ties broken by lower index, query excluded. `pool`
/// restricts the candidate set (e.g. to a train split); empty means all.
std::vector<std::size_t> knn_same_class(const LabeledDataset& ds, std::size_t index,
                                        std::size_t k,
                                        const std::vector<std::size_t>& pool = {});

/// Chart from data: tangent = top-m principal directions of the uncentered
/// neighbor deltas, normal = orthogonal complement.
LocalChart infer_chart(const LabeledDataset& ds, std::size_t index, std::size_t m,
                       std::size_t k, const std::vector<std::size_t>& pool = {});

/// Chart from the generating geometry: radial normals for spheres,
/// differentiated parameterization for swiss rolls, mapped through the
/// stored rotation.
LocalChart analytic_chart(const LabeledDataset& ds, std::size_t index);

LocalChart chart_at(const LabeledDataset& ds, std::size_t index, std::size_t m,
                    const AugmentConfig& cfg, const std::vector<std::size_t>& pool = {});

/// x + dt * t_hat + dn * n_hat with uniformly drawn basis coefficients and
/// offsets; target vector per the source class.
AugmentedSample sample_augmentation(const LocalChart& chart, const AugmentConfig& cfg,
                                    std::size_t classes, std::size_t source_class,
                                    std::uint64_t seed);

std::vector<double> build_distance_targets(std::size_t source_class, double delta_perp,
                                           std::size_t classes, double high_distance);

// Flattened training set: on-manifold rows carry zero self-distance.
struct TrainingSet {
  Matrix points;   // N x n
  Matrix targets;  // N x C
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> on_manifold;
  std::size_t classes = 0;

  std::size_t size() const { return points.rows(); }
};

/// n_on on-manifold rows plus n_off augmented rows, classes balanced, order
/// shuffled deterministically. Base points are drawn from `pool` (defaults
/// to the whole dataset); charts are cached per base point.
TrainingSet build_training_set(const LabeledDataset& ds, const AugmentConfig& cfg,
                               std::size_t n_on, std::size_t n_off, std::uint64_t seed,
                               const std::vector<std::size_t>& pool = {});

}  // namespace mdl::manifold
