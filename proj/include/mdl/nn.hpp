#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdl/matrix.hpp"

namespace mdl::nn {

enum class Head { distance, classifier };
enum class LossKind { mse, cross_entropy };
enum class ModelKind { distance_learner, standard, robust };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct ModelConfig {
  std::size_t input_dim = 0;
  std::size_t classes = 0;
  std::size_t width = 512;
  Head head = Head::distance;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;
};

struct LayerSpec {
  bool has_bn = true;  // fcb = linear + batch-norm + relu; otherwise plain affine
  std::size_t in = 0;
  std::size_t out = 0;
  int branch = -1;  // -1 for trunk layers
};

// Shared trunk of two FCB blocks, then one [FCB, FCB, FC->1] stack per
// class. The head is a per-branch sigmoid for the distance learner and a
// softmax over the collected branch outputs for classifiers.
struct Model {
  ModelConfig cfg;
  std::vector<LayerSpec> layers;

  // trainable parameters in declaration order (per layer: W, b, then
  // gamma, beta for FCB) and batch-norm running statistics
  std::vector<double> params;
  std::vector<double> running;
  bool train_mode = false;

  struct Offsets {
    std::size_t w = 0, b = 0, gamma = 0, beta = 0;
    std::size_t rmean = 0, rvar = 0;
  };
  std::vector<Offsets> off;

  Model() = default;
  explicit Model(const ModelConfig& config);

  /// Seeded init: W and b uniform in +-1/sqrt(fan_in), gamma 1, beta 0,
  /// running stats (0, 1).
  void init_params(std::uint64_t seed);

  std::size_t param_count() const { return params.size(); }
};

struct LayerCache {
  Matrix z;     // pre-normalization linear output
  Matrix xhat;  // normalized activations (train mode)
  Matrix out;   // post-activation output
  std::vector<double> mean, var;
};

struct ForwardCache {
  Matrix input;
  std::vector<LayerCache> layers;
  Matrix logits;
  Matrix outputs;
  bool train_mode = false;
};

/// Eval-mode forward with running statistics; per-row independent.
Matrix forward(const Model& model, const Matrix& x, ForwardCache* cache);

/// Train-mode forward using batch statistics (batch size >= 2) and
/// updating the running stats in place.
Matrix forward_train(Model& model, const Matrix& x, ForwardCache* cache);

double loss_value(const Matrix& outputs, LossKind kind, const Matrix* targets,
                  const std::vector<std::uint8_t>* labels);
Matrix loss_grad(const Matrix& outputs, LossKind kind, const Matrix* targets,
                 const std::vector<std::uint8_t>* labels);

/// Exact reverse-mode gradients through the head, branches, batch norm
/// (batch-statistics path in train mode) and trunk. `param_grads` and
/// `d_input` may each be null when not needed.
void backward(const Model& model, const ForwardCache& cache, const Matrix& d_outputs,
              std::vector<double>* param_grads, Matrix* d_input);

struct TrainConfig {
  double lr_max = 1e-5;
  std::size_t batch_size = 512;
  std::size_t epochs = 1000;
  double warmup_end = 10.0;
  double decay_start = 700.0;
  double decay_end = 1000.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LossKind loss = LossKind::mse;
  std::uint64_t seed = 0;
  // robust (min-max) training inner loop
  double robust_eta = 0.0;
  std::size_t robust_steps = 40;
  double robust_step_size = 0.0;  // 0 -> eta / 10

  void validate() const;
};

/// Knee schedule: linear warmup from zero, flat plateau, linear decay to
/// zero. Piecewise-linear in (fractional) epochs.
double knee_lr(double epoch, const TrainConfig& cfg);

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;
};

void adam_step(Model& model, const std::vector<double>& grads, AdamState& state,
               double lr, const TrainConfig& cfg);

struct TrainData {
  const Matrix* points = nullptr;
  const Matrix* targets = nullptr;                 // distance learner
  const std::vector<std::uint8_t>* labels = nullptr;  // classifiers
};

struct TrainResult {
  Model model;
  std::vector<double> epoch_loss;
};

/// Full training loop: seeded shuffling, knee schedule, Adam; the robust
/// variant replaces each batch by 40 ascent steps inside an L2 ball of
/// radius eta before the update. Returns the model in eval mode.
TrainResult train(ModelKind kind, const ModelConfig& mcfg, const TrainData& data,
                  const TrainConfig& cfg, bool verbose = false);

}  // namespace mdl::nn
