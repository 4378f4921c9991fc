#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdl/attack.hpp"
#include "mdl/manifold.hpp"
#include "mdl/nn.hpp"

namespace mdl::cli {

// Flat `section.key = value` experiment configuration. Unknown keys and
// duplicates are rejected with line numbers; applied defaults are echoed.
struct ExperimentConfig {
  // dataset
  std::string dataset_kind;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t train_per_class = 0;
  std::size_t test_per_class = 0;
  std::uint64_t seed = 7;

  // augment
  manifold::AugmentConfig augment;
  std::size_t n_on = 0;
  std::size_t n_off = 0;
  std::size_t test_on = 0;
  std::size_t test_off = 0;

  // train
  std::vector<nn::ModelKind> models;
  nn::TrainConfig train;
  std::size_t width = 512;
  std::vector<double> robust_etas;
  // per-model-kind epoch overrides (0 = use train.epochs); knee knots
  // rescale proportionally
  std::size_t dl_epochs = 0;
  std::size_t sc_epochs = 0;
  std::size_t rc_epochs = 0;

  nn::TrainConfig train_config_for(nn::ModelKind kind) const;

  // attack
  std::vector<double> attack_epsilons;
  attack::AttackConfig attack_cfg;
  std::size_t attack_test_count = 1000;

  // eval
  std::optional<double> tol;
  double grid_lo = -0.25, grid_hi = 1.25;
  std::size_t grid_res = 200;
  std::optional<double> clip_above;

  std::string workdir;

  // effective key/value view (defaults applied), per section, used for
  // stage fingerprints and logging
  std::map<std::string, std::string> effective;
  std::vector<std::string> applied_defaults;

  std::string fingerprint(const std::vector<std::string>& sections) const;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& name);

}  // namespace mdl::cli
