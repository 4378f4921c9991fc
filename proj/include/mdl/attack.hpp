#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdl/evaluate.hpp"
#include "mdl/nn.hpp"

namespace mdl::attack {

enum class AttackLoss { xent_ascent, distance_margin };

AttackLoss attack_loss_from_string(const std::string& s);

struct AttackConfig {
  double epsilon = 0.0;       // L2 radius, normalized units
  std::size_t steps = 100;
  double step_size = 5e-3;
  AttackLoss loss_spec = AttackLoss::xent_ascent;
  bool random_start = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Objective {
  std::vector<double> value;  // per row, to maximize
  Matrix grad;                // input gradient per row
};

/// Per-row adversarial objective and its input gradient (eval mode):
/// cross-entropy of the prediction vs the true label, or the predicted
/// distance to the true class minus the closest other class.
Objective attack_objective(const nn::Model& model, const Matrix& x,
                           const std::vector<std::uint8_t>& y, AttackLoss spec);

/// L2 PGD: normalized-gradient ascent steps with exact ball projection,
/// keeping the best iterate seen per row. Batched over rows (eval-mode
/// forward is row-independent).
Matrix pgd_attack(const nn::Model& model, const Matrix& x,
                  const std::vector<std::uint8_t>& y, const AttackConfig& cfg);

std::vector<double> pgd_attack_point(const nn::Model& model, const std::vector<double>& x,
                                     std::uint8_t y, const AttackConfig& cfg);

struct SweepModel {
  const nn::Model* model = nullptr;
  std::string name;
  AttackLoss loss_spec = AttackLoss::xent_ascent;
  eval::Rule rule;
};

struct RobustnessRow {
  std::string model;
  double epsilon = 0.0;
  double clean_accuracy = 0.0;
  double adversarial_accuracy = 0.0;
  std::optional<double> ood_rate;  // distance learner only
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;
};

/// Attacks every test point at each epsilon (ascending). A point counts as
/// broken once any feasible attack found so far misclassifies it; smaller-
/// radius attacks stay feasible at larger radii, so reported accuracy is
/// exactly non-increasing in epsilon.
RobustnessReport robustness_sweep(const std::vector<SweepModel>& models,
                                  const Matrix& points,
                                  const std::vector<std::uint8_t>& labels,
                                  const std::vector<double>& epsilons,
                                  const AttackConfig& base);

void write_robustness_csv(const RobustnessReport& report, const std::string& path);

}  // namespace mdl::attack
