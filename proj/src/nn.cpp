#include "mdl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mdl/gemm.hpp"
#include "mdl/parallel.hpp"
#include "mdl/rng.hpp"

namespace mdl::nn {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::distance_learner: return "distance_learner";
    case ModelKind::standard: return "standard";
    case ModelKind::robust: return "robust";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "distance_learner" || s == "dl") return ModelKind::distance_learner;
  if (s == "standard" || s == "sc") return ModelKind::standard;
  if (s == "robust" || s == "rc") return ModelKind::robust;
  throw Error::config("unknown model kind: " + s);
}

Model::Model(const ModelConfig& config) : cfg(config) {
  if (cfg.input_dim == 0 || cfg.classes == 0 || cfg.width == 0) {
    throw Error::dimension("model: dimensions must be positive");
  }
  layers.push_back({true, cfg.input_dim, cfg.width, -1});
  layers.push_back({true, cfg.width, cfg.width, -1});
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    layers.push_back({true, cfg.width, cfg.width, static_cast<int>(c)});
    layers.push_back({true, cfg.width, cfg.width, static_cast<int>(c)});
    layers.push_back({false, cfg.width, 1, static_cast<int>(c)});
  }

  std::size_t p = 0, r = 0;
  off.resize(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const LayerSpec& ls = layers[li];
    off[li].w = p;
    p += ls.out * ls.in;
    off[li].b = p;
    p += ls.out;
    if (ls.has_bn) {
      off[li].gamma = p;
      p += ls.out;
      off[li].beta = p;
      p += ls.out;
      off[li].rmean = r;
      r += ls.out;
      off[li].rvar = r;
      r += ls.out;
    }
  }
  params.assign(p, 0.0);
  running.assign(r, 0.0);
}

void Model::init_params(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const LayerSpec& ls = layers[li];
    const double bound = 1.0 / std::sqrt(static_cast<double>(ls.in));
    for (std::size_t i = 0; i < ls.out * ls.in; ++i) {
      params[off[li].w + i] = rng.uniform(-bound, bound);
    }
    for (std::size_t i = 0; i < ls.out; ++i) {
      params[off[li].b + i] = rng.uniform(-bound, bound);
    }
    if (ls.has_bn) {
      for (std::size_t i = 0; i < ls.out; ++i) {
        params[off[li].gamma + i] = 1.0;
        params[off[li].beta + i] = 0.0;
        running[off[li].rmean + i] = 0.0;
        running[off[li].rvar + i] = 1.0;
      }
    }
  }
}

namespace {

void ensure_shape(Matrix& m, std::size_t rows, std::size_t cols) {
  if (m.rows() != rows || m.cols() != cols) m = Matrix(rows, cols);
}

// pool dispatch costs more than the loop itself on small batches
void maybe_parallel(std::size_t total_work, std::size_t n,
                    const std::function<void(std::size_t, std::size_t)>& fn) {
  if (total_work < (std::size_t{1} << 14)) {
    fn(0, n);
  } else {
    parallel_for(n, fn);
  }
}

// index of the matrix feeding layer li
const Matrix& layer_input(const Model& model, const ForwardCache& cache, std::size_t li) {
  if (li == 0) return cache.input;
  if (li == 1) return cache.layers[0].out;
  const LayerSpec& ls = model.layers[li];
  const std::size_t branch_first = 2 + static_cast<std::size_t>(ls.branch) * 3;
  if (li == branch_first) return cache.layers[1].out;  // trunk output
  return cache.layers[li - 1].out;
}

void linear_forward(const Model& model, std::size_t li, const Matrix& in, Matrix& z) {
  const LayerSpec& ls = model.layers[li];
  const std::size_t B = in.rows();
  ensure_shape(z, B, ls.out);
  dgemm(false, true, B, ls.out, ls.in, 1.0, in.data(), ls.in,
        model.params.data() + model.off[li].w, ls.in, 0.0, z.data(), ls.out);
  const double* bias = model.params.data() + model.off[li].b;
  maybe_parallel(B * ls.out, B, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      double* row = z.row(i);
      for (std::size_t j = 0; j < ls.out; ++j) row[j] += bias[j];
    }
  });
}

void fcb_forward(Model* mut_model, const Model& model, std::size_t li, const Matrix& in,
                 LayerCache& lc, bool train) {
  const LayerSpec& ls = model.layers[li];
  const std::size_t B = in.rows();
  const std::size_t F = ls.out;
  linear_forward(model, li, in, lc.z);
  ensure_shape(lc.xhat, B, F);
  ensure_shape(lc.out, B, F);
  lc.mean.assign(F, 0.0);
  lc.var.assign(F, 0.0);

  const double* gamma = model.params.data() + model.off[li].gamma;
  const double* beta = model.params.data() + model.off[li].beta;
  const double eps = model.cfg.bn_epsilon;

  if (train) {
    if (B < 2) throw Error::data("forward: train-mode batch must have at least 2 rows");
    // row-major accumulation over a feature slice per thread
    maybe_parallel(B * F, F, [&](std::size_t f0, std::size_t f1) {
      for (std::size_t i = 0; i < B; ++i) {
        const double* zrow = lc.z.row(i);
        for (std::size_t j = f0; j < f1; ++j) lc.mean[j] += zrow[j];
      }
      for (std::size_t j = f0; j < f1; ++j) lc.mean[j] /= static_cast<double>(B);
      for (std::size_t i = 0; i < B; ++i) {
        const double* zrow = lc.z.row(i);
        for (std::size_t j = f0; j < f1; ++j) {
          const double d = zrow[j] - lc.mean[j];
          lc.var[j] += d * d;
        }
      }
      for (std::size_t j = f0; j < f1; ++j) lc.var[j] /= static_cast<double>(B);
    });
    // update running statistics (unbiased variance, torch-style momentum)
    double* rmean = mut_model->running.data() + model.off[li].rmean;
    double* rvar = mut_model->running.data() + model.off[li].rvar;
    const double mom = model.cfg.bn_momentum;
    const double unbias = static_cast<double>(B) / static_cast<double>(B - 1);
    for (std::size_t j = 0; j < F; ++j) {
      rmean[j] = (1.0 - mom) * rmean[j] + mom * lc.mean[j];
      rvar[j] = (1.0 - mom) * rvar[j] + mom * lc.var[j] * unbias;
    }
  } else {
    const double* rmean = model.running.data() + model.off[li].rmean;
    const double* rvar = model.running.data() + model.off[li].rvar;
    for (std::size_t j = 0; j < F; ++j) {
      lc.mean[j] = rmean[j];
      lc.var[j] = rvar[j];
    }
  }

  std::vector<double> inv_std(F);
  for (std::size_t j = 0; j < F; ++j) inv_std[j] = 1.0 / std::sqrt(lc.var[j] + eps);
  maybe_parallel(B * ls.out, B, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      const double* zrow = lc.z.row(i);
      double* xrow = lc.xhat.row(i);
      double* orow = lc.out.row(i);
      for (std::size_t j = 0; j < F; ++j) {
        const double xh = (zrow[j] - lc.mean[j]) * inv_std[j];
        xrow[j] = xh;
        const double a = gamma[j] * xh + beta[j];
        orow[j] = a > 0.0 ? a : 0.0;
      }
    }
  });
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Matrix run_forward(Model* mut_model, const Model& model, const Matrix& x,
                   ForwardCache* cache, bool train) {
  if (x.cols() != model.cfg.input_dim) {
    throw Error::dimension("forward: input dimension mismatch");
  }
  if (!x.all_finite()) throw Error::data("forward: non-finite input");
  const std::size_t B = x.rows();
  const std::size_t C = model.cfg.classes;

  cache->train_mode = train;
  cache->input = x;
  cache->layers.resize(model.layers.size());
  ensure_shape(cache->logits, B, C);

  fcb_forward(mut_model, model, 0, cache->input, cache->layers[0], train);
  fcb_forward(mut_model, model, 1, cache->layers[0].out, cache->layers[1], train);

  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t lb = 2 + c * 3;
    fcb_forward(mut_model, model, lb, cache->layers[1].out, cache->layers[lb], train);
    fcb_forward(mut_model, model, lb + 1, cache->layers[lb].out, cache->layers[lb + 1], train);
    LayerCache& fc = cache->layers[lb + 2];
    linear_forward(model, lb + 2, cache->layers[lb + 1].out, fc.z);
    fc.out = fc.z;
    for (std::size_t i = 0; i < B; ++i) cache->logits(i, c) = fc.z(i, 0);
  }

  ensure_shape(cache->outputs, B, C);
  if (model.cfg.head == Head::distance) {
    maybe_parallel(B * C, B, [&](std::size_t r0, std::size_t r1) {
      for (std::size_t i = r0; i < r1; ++i) {
        for (std::size_t c = 0; c < C; ++c) {
          cache->outputs(i, c) = sigmoid(cache->logits(i, c));
        }
      }
    });
  } else {
    maybe_parallel(B * C, B, [&](std::size_t r0, std::size_t r1) {
      for (std::size_t i = r0; i < r1; ++i) {
        const double* lrow = cache->logits.row(i);
        double* orow = cache->outputs.row(i);
        double mx = lrow[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, lrow[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
          orow[c] = std::exp(lrow[c] - mx);
          sum += orow[c];
        }
        for (std::size_t c = 0; c < C; ++c) orow[c] /= sum;
      }
    });
  }
  return cache->outputs;
}

}  // namespace

Matrix forward(const Model& model, const Matrix& x, ForwardCache* cache) {
  if (model.train_mode) {
    throw Error::unsupported("forward: const forward requires eval mode");
  }
  ForwardCache local;
  ForwardCache* c = cache ? cache : &local;
  return run_forward(nullptr, model, x, c, false);
}

Matrix forward_train(Model& model, const Matrix& x, ForwardCache* cache) {
  ForwardCache local;
  ForwardCache* c = cache ? cache : &local;
  return run_forward(&model, model, x, c, true);
}

double loss_value(const Matrix& outputs, LossKind kind, const Matrix* targets,
                  const std::vector<std::uint8_t>* labels) {
  const std::size_t B = outputs.rows();
  const std::size_t C = outputs.cols();
  if (kind == LossKind::mse) {
    if (!targets || targets->rows() != B || targets->cols() != C) {
      throw Error::dimension("mse loss: target shape mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < B * C; ++i) {
      const double d = outputs.data()[i] - targets->data()[i];
      s += d * d;
    }
    return s / static_cast<double>(B * C);
  }
  if (!labels || labels->size() != B) {
    throw Error::dimension("cross-entropy loss: label count mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const std::size_t y = (*labels)[i];
    if (y >= C) throw Error::dimension("cross-entropy loss: label out of range");
    s += -std::log(std::max(outputs(i, y), 1e-300));
  }
  return s / static_cast<double>(B);
}

Matrix loss_grad(const Matrix& outputs, LossKind kind, const Matrix* targets,
                 const std::vector<std::uint8_t>* labels) {
  const std::size_t B = outputs.rows();
  const std::size_t C = outputs.cols();
  Matrix d(B, C);
  if (kind == LossKind::mse) {
    if (!targets || targets->rows() != B || targets->cols() != C) {
      throw Error::dimension("mse loss: target shape mismatch");
    }
    const double scale = 2.0 / static_cast<double>(B * C);
    for (std::size_t i = 0; i < B * C; ++i) {
      d.data()[i] = scale * (outputs.data()[i] - targets->data()[i]);
    }
  } else {
    if (!labels || labels->size() != B) {
      throw Error::dimension("cross-entropy loss: label count mismatch");
    }
    for (std::size_t i = 0; i < B; ++i) {
      const std::size_t y = (*labels)[i];
      if (y >= C) throw Error::dimension("cross-entropy loss: label out of range");
      d(i, y) = -1.0 / (static_cast<double>(B) * std::max(outputs(i, y), 1e-300));
    }
  }
  return d;
}

namespace {

// dOut -> gradients of one FCB layer; returns dIn. All batch reductions
// run row-major over per-thread feature slices; scratch is reused across
// calls (backward runs on one thread, layer ops parallelize internally).
void fcb_backward(const Model& model, std::size_t li, const LayerCache& lc,
                  const Matrix& in, const Matrix& d_out, bool train,
                  std::vector<double>* pg, Matrix& d_in) {
  const LayerSpec& ls = model.layers[li];
  const std::size_t B = d_out.rows();
  const std::size_t F = ls.out;
  const double* gamma = model.params.data() + model.off[li].gamma;
  const double eps = model.cfg.bn_epsilon;

  static thread_local Matrix d_z_scratch;
  static thread_local std::vector<double> dgamma_scratch, dbeta_scratch, inv_scratch;
  // local bindings: thread_locals are re-resolved inside worker lambdas
  Matrix& d_z = d_z_scratch;
  std::vector<double>& dgamma = dgamma_scratch;
  std::vector<double>& dbeta = dbeta_scratch;
  std::vector<double>& inv_std = inv_scratch;
  ensure_shape(d_z, B, F);
  dgamma.assign(F, 0.0);
  dbeta.assign(F, 0.0);
  inv_std.resize(F);
  for (std::size_t j = 0; j < F; ++j) inv_std[j] = 1.0 / std::sqrt(lc.var[j] + eps);

  // through ReLU and the affine bn parameters; d_z temporarily holds d_xhat
  maybe_parallel(B * F, F, [&](std::size_t f0, std::size_t f1) {
    for (std::size_t i = 0; i < B; ++i) {
      const double* orow = lc.out.row(i);
      const double* xrow = lc.xhat.row(i);
      const double* drow = d_out.row(i);
      double* zrow = d_z.row(i);
      for (std::size_t j = f0; j < f1; ++j) {
        const double da = orow[j] > 0.0 ? drow[j] : 0.0;
        dgamma[j] += da * xrow[j];
        dbeta[j] += da;
        zrow[j] = da * gamma[j];
      }
    }
  });
  if (pg) {
    double* g_gamma = pg->data() + model.off[li].gamma;
    double* g_beta = pg->data() + model.off[li].beta;
    for (std::size_t j = 0; j < F; ++j) {
      g_gamma[j] += dgamma[j];
      g_beta[j] += dbeta[j];
    }
  }

  // through normalization: d_xhat column sums follow from dgamma/dbeta
  // (s1 = gamma * dbeta, s2 = gamma * dgamma), no extra reduction pass
  if (train) {
    maybe_parallel(B * F, F, [&](std::size_t f0, std::size_t f1) {
      const double invB = 1.0 / static_cast<double>(B);
      for (std::size_t i = 0; i < B; ++i) {
        const double* xrow = lc.xhat.row(i);
        double* zrow = d_z.row(i);
        for (std::size_t j = f0; j < f1; ++j) {
          const double s1 = gamma[j] * dbeta[j];
          const double s2 = gamma[j] * dgamma[j];
          zrow[j] = inv_std[j] * invB *
                    (static_cast<double>(B) * zrow[j] - s1 - xrow[j] * s2);
        }
      }
    });
  } else {
    maybe_parallel(B * F, B, [&](std::size_t r0, std::size_t r1) {
      for (std::size_t i = r0; i < r1; ++i) {
        double* zrow = d_z.row(i);
        for (std::size_t j = 0; j < F; ++j) zrow[j] *= inv_std[j];
      }
    });
  }

  // through the affine map
  if (pg) {
    dgemm(true, false, F, ls.in, B, 1.0, d_z.data(), F, in.data(), ls.in, 1.0,
          pg->data() + model.off[li].w, ls.in);
    static thread_local std::vector<double> db_scratch;
    std::vector<double>& db_sum = db_scratch;
    db_sum.assign(F, 0.0);
    maybe_parallel(B * F, F, [&](std::size_t f0, std::size_t f1) {
      for (std::size_t i = 0; i < B; ++i) {
        const double* zrow = d_z.row(i);
        for (std::size_t j = f0; j < f1; ++j) db_sum[j] += zrow[j];
      }
    });
    double* g_b = pg->data() + model.off[li].b;
    for (std::size_t j = 0; j < F; ++j) g_b[j] += db_sum[j];
  }
  ensure_shape(d_in, B, ls.in);
  dgemm(false, false, B, ls.in, F, 1.0, d_z.data(), F,
        model.params.data() + model.off[li].w, ls.in, 0.0, d_in.data(), ls.in);
}

}  // namespace

void backward(const Model& model, const ForwardCache& cache, const Matrix& d_outputs,
              std::vector<double>* param_grads, Matrix* d_input) {
  const std::size_t B = cache.outputs.rows();
  const std::size_t C = model.cfg.classes;
  if (d_outputs.rows() != B || d_outputs.cols() != C) {
    throw Error::dimension("backward: upstream gradient shape mismatch");
  }
  if (cache.layers.size() != model.layers.size()) {
    throw Error::data("backward: cache does not match this model");
  }
  if (param_grads) param_grads->assign(model.param_count(), 0.0);

  // head
  Matrix d_logits(B, C);
  if (model.cfg.head == Head::distance) {
    for (std::size_t i = 0; i < B; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        const double s = cache.outputs(i, c);
        d_logits(i, c) = d_outputs(i, c) * s * (1.0 - s);
      }
    }
  } else {
    for (std::size_t i = 0; i < B; ++i) {
      const double* p = cache.outputs.row(i);
      const double* dy = d_outputs.row(i);
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += dy[c] * p[c];
      for (std::size_t c = 0; c < C; ++c) d_logits(i, c) = p[c] * (dy[c] - dot);
    }
  }

  const bool train = cache.train_mode;
  Matrix d_trunk_out(B, model.cfg.width);
  Matrix d_buf1, d_buf2;

  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t lb = 2 + c * 3;
    const std::size_t fc = lb + 2;
    const LayerSpec& fcs = model.layers[fc];

    // branch fc: d_z has one column
    Matrix d_zfc(B, 1);
    for (std::size_t i = 0; i < B; ++i) d_zfc(i, 0) = d_logits(i, c);
    const Matrix& fc_in = layer_input(model, cache, fc);
    if (param_grads) {
      dgemm(true, false, 1, fcs.in, B, 1.0, d_zfc.data(), 1, fc_in.data(), fcs.in, 1.0,
            param_grads->data() + model.off[fc].w, fcs.in);
      double s = 0.0;
      for (std::size_t i = 0; i < B; ++i) s += d_zfc(i, 0);
      (*param_grads)[model.off[fc].b] += s;
    }
    ensure_shape(d_buf1, B, fcs.in);
    dgemm(false, false, B, fcs.in, 1, 1.0, d_zfc.data(), 1,
          model.params.data() + model.off[fc].w, fcs.in, 0.0, d_buf1.data(), fcs.in);

    fcb_backward(model, lb + 1, cache.layers[lb + 1], layer_input(model, cache, lb + 1),
                 d_buf1, train, param_grads, d_buf2);
    fcb_backward(model, lb, cache.layers[lb], layer_input(model, cache, lb), d_buf2,
                 train, param_grads, d_buf1);
    for (std::size_t i = 0; i < B * model.cfg.width; ++i) {
      d_trunk_out.data()[i] += d_buf1.data()[i];
    }
  }

  fcb_backward(model, 1, cache.layers[1], layer_input(model, cache, 1), d_trunk_out,
               train, param_grads, d_buf1);
  Matrix d_in;
  fcb_backward(model, 0, cache.layers[0], layer_input(model, cache, 0), d_buf1, train,
               param_grads, d_in);
  if (d_input) *d_input = std::move(d_in);
}

void TrainConfig::validate() const {
  if (epochs == 0) throw Error::config("train: epochs must be positive");
  if (batch_size < 2) throw Error::config("train: batch size must be at least 2");
  if (lr_max <= 0.0) throw Error::config("train: lr must be positive");
  if (!(0.0 <= warmup_end && warmup_end <= decay_start && decay_start <= decay_end)) {
    throw Error::config("train: knee schedule knots must be ordered");
  }
  if (decay_end != static_cast<double>(epochs)) {
    throw Error::config("train: decay_end must equal epochs");
  }
}

double knee_lr(double epoch, const TrainConfig& cfg) {
  if (epoch <= 0.0) return 0.0;
  if (epoch < cfg.warmup_end) return cfg.lr_max * (epoch / cfg.warmup_end);
  if (epoch <= cfg.decay_start) return cfg.lr_max;
  if (epoch >= cfg.decay_end) return 0.0;
  return cfg.lr_max * (cfg.decay_end - epoch) / (cfg.decay_end - cfg.decay_start);
}

void adam_step(Model& model, const std::vector<double>& grads, AdamState& state,
               double lr, const TrainConfig& cfg) {
  const std::size_t n = model.param_count();
  if (grads.size() != n) throw Error::dimension("adam: gradient size mismatch");
  if (state.m.size() != n) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
    state.t = 0;
  }
  ++state.t;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) {
      throw Error::numeric("training diverged: non-finite gradient");
    }
  }
  maybe_parallel(n, n, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      const double g = grads[i];
      state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
      state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
      const double mhat = state.m[i] / c1;
      const double vhat = state.v[i] / c2;
      model.params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  });
}

namespace {

// Inner maximization of Eq.-2 robust training: ascent on the training loss
// within an L2 ball of radius eta around each clean row. Runs against the
// model in eval mode (running statistics), so each row's attack is
// independent of batch composition.
Matrix robust_inner(Model& model, const Matrix& x0, const std::vector<std::uint8_t>& labels,
                    const TrainConfig& cfg, ForwardCache& cache) {
  const std::size_t B = x0.rows();
  const std::size_t n = x0.cols();
  const double step = cfg.robust_step_size > 0.0 ? cfg.robust_step_size : cfg.robust_eta / 10.0;
  Matrix x = x0;
  const bool was_train = model.train_mode;
  model.train_mode = false;
  Matrix d_in;
  for (std::size_t it = 0; it < cfg.robust_steps; ++it) {
    const Matrix& out = forward(model, x, &cache);
    const Matrix dy = loss_grad(out, cfg.loss, nullptr, &labels);
    backward(model, cache, dy, nullptr, &d_in);
    for (std::size_t i = 0; i < B; ++i) {
      double* row = x.row(i);
      const double* g = d_in.row(i);
      const double gn = norm2(g, n);
      if (gn > 0.0) {
        for (std::size_t j = 0; j < n; ++j) row[j] += step * g[j] / gn;
      }
      // exact projection back onto the eta-ball
      double dn = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = row[j] - x0(i, j);
        dn += d * d;
      }
      dn = std::sqrt(dn);
      if (dn > cfg.robust_eta) {
        const double f = cfg.robust_eta / dn;
        for (std::size_t j = 0; j < n; ++j) row[j] = x0(i, j) + f * (row[j] - x0(i, j));
      }
    }
  }
  model.train_mode = was_train;
  return x;
}

}  // namespace

TrainResult train(ModelKind kind, const ModelConfig& mcfg, const TrainData& data,
                  const TrainConfig& cfg, bool verbose) {
  cfg.validate();
  if (!data.points || data.points->rows() == 0) {
    throw Error::data("train: empty training set");
  }
  const bool needs_targets = cfg.loss == LossKind::mse;
  if (needs_targets && !data.targets) throw Error::data("train: mse loss needs targets");
  if (!needs_targets && !data.labels) throw Error::data("train: cross-entropy needs labels");
  if (kind == ModelKind::robust && cfg.robust_eta < 0.0) {
    throw Error::config("train: robust eta must be non-negative");
  }

  const Matrix& X = *data.points;
  const std::size_t N = X.rows();
  const std::size_t n = X.cols();

  TrainResult result;
  result.model = Model(mcfg);
  result.model.init_params(derive_seed(cfg.seed, streams::init));
  Model& model = result.model;

  AdamState adam;
  ForwardCache cache;
  ForwardCache attack_cache;
  std::vector<double> grads;
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);

  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, streams::shuffle);
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, (N + cfg.batch_size - 1) / cfg.batch_size);

  Matrix xb, tb;
  std::vector<std::uint8_t> lb;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng(derive_seed(shuffle_seed, epoch));
    for (std::size_t i = N; i > 1; --i) std::swap(order[i - 1], order[erng.index(i)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::size_t step_idx = 0;
    for (std::size_t start = 0; start < N; start += cfg.batch_size, ++step_idx) {
      const std::size_t bsize = std::min(cfg.batch_size, N - start);
      if (bsize < 2) continue;  // batch statistics need more than one row

      ensure_shape(xb, bsize, n);
      if (needs_targets) ensure_shape(tb, bsize, data.targets->cols());
      lb.resize(bsize);
      for (std::size_t i = 0; i < bsize; ++i) {
        const std::size_t src = order[start + i];
        std::copy(X.row(src), X.row(src) + n, xb.row(i));
        if (needs_targets) {
          std::copy(data.targets->row(src), data.targets->row(src) + data.targets->cols(),
                    tb.row(i));
        } else {
          lb[i] = (*data.labels)[src];
        }
      }

      const Matrix* batch_x = &xb;
      Matrix x_adv;
      if (kind == ModelKind::robust && cfg.robust_eta > 0.0) {
        x_adv = robust_inner(model, xb, lb, cfg, attack_cache);
        batch_x = &x_adv;
      }

      model.train_mode = true;
      const Matrix& out = forward_train(model, *batch_x, &cache);
      const double loss = loss_value(out, cfg.loss, needs_targets ? &tb : nullptr,
                                     needs_targets ? nullptr : &lb);
      if (!std::isfinite(loss)) {
        throw Error::numeric("training diverged at epoch " + std::to_string(epoch));
      }
      loss_sum += loss;
      ++batches;

      const Matrix dy = loss_grad(out, cfg.loss, needs_targets ? &tb : nullptr,
                                  needs_targets ? nullptr : &lb);
      backward(model, cache, dy, &grads, nullptr);
      const double frac_epoch =
          static_cast<double>(epoch) +
          static_cast<double>(step_idx) / static_cast<double>(steps_per_epoch);
      adam_step(model, grads, adam, knee_lr(frac_epoch, cfg), cfg);
    }
    result.epoch_loss.push_back(batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0);
    if (verbose && (epoch % 10 == 0 || epoch + 1 == cfg.epochs)) {
      std::fprintf(stderr, "[train %s] epoch %zu/%zu loss %.6g lr %.3g\n",
                   to_string(kind).c_str(), epoch + 1, cfg.epochs, result.epoch_loss.back(),
                   knee_lr(static_cast<double>(epoch), cfg));
    }
  }
  model.train_mode = false;
  return result;
}

}  // namespace mdl::nn
