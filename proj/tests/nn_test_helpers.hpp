// Shared helpers for gradient and attack checks (unit tests and the
// acceptance suite).
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mdl/nn.hpp"
#include "mdl/rng.hpp"

namespace helpers {

struct FdReport {
  double worst_rel = 0.0;
  std::size_t checked = 0;
};

// central finite differences over every parameter and every input entry
inline FdReport finite_difference_check(const mdl::nn::Model& model, const mdl::Matrix& x,
                                        mdl::nn::LossKind loss, const mdl::Matrix* targets,
                                        const std::vector<std::uint8_t>* labels,
                                        bool train, double h = 1e-5) {
  using namespace mdl;
  using namespace mdl::nn;
  ForwardCache cache;
  auto loss_at = [&](const Model& m, const Matrix& xin) {
    Model scratch = m;  // keep running stats frozen across evaluations
    scratch.train_mode = train;
    const Matrix& out =
        train ? forward_train(scratch, xin, &cache) : forward(scratch, xin, &cache);
    return loss_value(out, loss, targets, labels);
  };

  Model work = model;
  work.train_mode = train;
  ForwardCache c2;
  const Matrix& out = train ? forward_train(work, x, &c2) : forward(work, x, &c2);
  const Matrix dy = loss_grad(out, loss, targets, labels);
  std::vector<double> grads;
  Matrix d_input;
  backward(work, c2, dy, &grads, &d_input);

  FdReport rep;
  // the 1e-5 floor checks gradients below it absolutely (to 1e-9), since a
  // central difference of an O(1) loss carries ~1e-10 of rounding noise
  auto record = [&](double analytic, double fd) {
    const double denom = std::max({std::fabs(analytic), std::fabs(fd), 1e-5});
    rep.worst_rel = std::max(rep.worst_rel, std::fabs(analytic - fd) / denom);
    ++rep.checked;
  };

  for (std::size_t i = 0; i < model.param_count(); ++i) {
    Model m1 = model, m2 = model;
    m1.params[i] += h;
    m2.params[i] -= h;
    record(grads[i], (loss_at(m1, x) - loss_at(m2, x)) / (2 * h));
  }
  for (std::size_t i = 0; i < x.rows() * x.cols(); ++i) {
    Matrix x1 = x, x2 = x;
    x1.data()[i] += h;
    x2.data()[i] -= h;
    record(d_input.data()[i], (loss_at(model, x1) - loss_at(model, x2)) / (2 * h));
  }
  return rep;
}

// A classifier that is exactly affine on a bounded region: every ReLU input
// is shifted far positive via beta, so the logit margin reduces to an
// affine function of x.
inline mdl::nn::Model affine_region_model(const std::vector<double>& w, double bias) {
  using namespace mdl;
  using namespace mdl::nn;
  const std::size_t n = w.size();
  ModelConfig mc;
  mc.input_dim = n;
  mc.classes = 2;
  mc.width = 8;
  mc.head = Head::classifier;
  Model m(mc);
  m.init_params(1);
  const double shift = 100.0;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const auto& ls = m.layers[li];
    const auto& off = m.off[li];
    for (std::size_t i = 0; i < ls.out * ls.in; ++i) m.params[off.w + i] = 0.0;
    for (std::size_t i = 0; i < ls.out; ++i) m.params[off.b + i] = 0.0;
    if (ls.has_bn) {
      for (std::size_t i = 0; i < ls.out; ++i) {
        m.params[off.gamma + i] = 1.0;
        m.params[off.beta + i] = shift;
        m.running[off.rmean + i] = 0.0;
        m.running[off.rvar + i] = 1.0;
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j) m.params[m.off[0].w + j * m.layers[0].in + j] = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    m.params[m.off[1].w + j * m.layers[1].in + j] = 1.0;
    m.params[m.off[1].b + j] = -shift;
  }
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t k = 0; k < 2; ++k) {
      const std::size_t li = 2 + c * 3 + k;
      for (std::size_t j = 0; j < n; ++j) {
        m.params[m.off[li].w + j * m.layers[li].in + j] = 1.0;
        m.params[m.off[li].b + j] = -shift;
      }
    }
    const std::size_t fc = 2 + c * 3 + 2;
    const double sign = c == 0 ? 0.5 : -0.5;
    double wsum = 0.0;
    for (double x : w) wsum += x;
    for (std::size_t j = 0; j < n; ++j) m.params[m.off[fc].w + j] = sign * w[j];
    m.params[m.off[fc].b] = sign * bias - sign * shift * wsum;
  }
  m.train_mode = false;
  return m;
}

// random model with settled running statistics
inline mdl::nn::Model warmed_model(std::size_t n, std::size_t classes, std::size_t width,
                                   mdl::nn::Head head, std::uint64_t seed) {
  using namespace mdl;
  using namespace mdl::nn;
  ModelConfig mc;
  mc.input_dim = n;
  mc.classes = classes;
  mc.width = width;
  mc.head = head;
  Model m(mc);
  m.init_params(seed);
  Rng rng(seed + 1);
  Matrix warm(32, n);
  for (std::size_t i = 0; i < 32 * n; ++i) warm.data()[i] = rng.uniform(0.0, 1.0);
  (void)forward_train(m, warm, nullptr);
  m.train_mode = false;
  return m;
}

}  // namespace helpers
