#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdl/dataset.hpp"
#include "mdl/manifold.hpp"
#include "mdl/nn.hpp"

namespace mdl::eval {

constexpr int kOutOfDomain = -1;

struct ClassificationOutcome {
  int decision = 0;  // class index or kOutOfDomain
  double min_distance = 0.0;
  std::size_t argmin_class = 0;
};

/// Argmin over predicted distances, ties to the lowest index; out-of-domain
/// when a tolerance is set and every distance exceeds it.
ClassificationOutcome classify_distances(const std::vector<double>& d,
                                         std::optional<double> tol);
ClassificationOutcome classify_distances(const double* d, std::size_t c,
                                         std::optional<double> tol);

/// Classification rule bundled with its parameters: distance models use the
/// min-distance / tolerance rule, classifier heads use softmax argmax.
struct Rule {
  bool distance_rule = false;
  std::optional<double> tol;
};

int decide(const double* outputs, std::size_t classes, const Rule& rule);

/// Mean squared error of eval-mode predictions against the stored targets.
double distance_test_loss(const nn::Model& model, const manifold::TrainingSet& testset);

/// Fraction misclassified under the rule; out_of_domain on a labeled point
/// counts as an error.
double classification_error(const nn::Model& model, const Matrix& points,
                            const std::vector<std::uint8_t>& labels, const Rule& rule);

struct SliceGrid {
  std::vector<double> origin;
  std::vector<double> axis_u, axis_v;  // orthonormal
  double u_lo = 0.0, u_hi = 0.0, v_lo = 0.0, v_hi = 0.0;
  std::size_t res_u = 0, res_v = 0;
  Matrix nodes;      // (res_u*res_v) x n, row index = iu*res_v + iv
  Matrix values;     // per node: C predicted distances or probabilities
  std::vector<int> decisions;

  double u_at(std::size_t iu) const;
  double v_at(std::size_t iv) const;
  std::size_t node_index(std::size_t iu, std::size_t iv) const { return iu * res_v + iv; }
};

struct PlaneSpec {
  std::vector<double> origin;
  std::vector<double> dir_u, dir_v;  // any two independent directions
  double u_lo = -0.5, u_hi = 0.5, v_lo = -0.5, v_hi = 0.5;
};

/// Default slice plane: through the embedded canonical center, spanned by
/// the first two canonical axes mapped through the stored rotation. Random
/// planes in high dimension almost never cut the augmentation bands.
PlaneSpec default_plane(const LabeledDataset& ds, double u_lo, double u_hi,
                        double v_lo, double v_hi);

/// Orthonormalized lattice of embedded-space points covering the extent.
SliceGrid build_slice_grid(const PlaneSpec& plane, std::size_t res_u, std::size_t res_v);

/// Eval-mode model outputs per node plus the classification decision.
void evaluate_grid(const nn::Model& model, SliceGrid* grid, const Rule& rule);

struct MetricsRow {
  std::string dataset;
  std::size_t m = 0, n = 0;
  std::string model;
  double train_mse = 0.0;
  double test_mse = 0.0;
  std::size_t test_count = 0;
  double clf_error = 0.0;
};

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

/// CSV export of an evaluated grid (u, v, values, decision). Node
/// coordinates can be included with `with_coords`; `clip_above` blanks
/// values above the threshold, mirroring the paper's display convention.
void write_grid_csv(const SliceGrid& grid, const std::string& path, bool with_coords,
                    std::optional<double> clip_above);

/// False-color portable pixmap of values[:, channel].
void write_grid_ppm(const SliceGrid& grid, const std::string& path, std::size_t channel);

}  // namespace mdl::eval
