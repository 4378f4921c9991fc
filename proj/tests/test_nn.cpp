#include <doctest.h>

#include <cmath>

#include "mdl/nn.hpp"
#include "mdl/rng.hpp"
#include "nn_test_helpers.hpp"

using namespace mdl;
using namespace mdl::nn;
using helpers::FdReport;
using helpers::finite_difference_check;

TEST_SUITE_BEGIN("nn");

namespace {

ModelConfig tiny_config(std::size_t n, std::size_t classes, Head head) {
  ModelConfig mc;
  mc.input_dim = n;
  mc.classes = classes;
  mc.width = 8;
  mc.head = head;
  return mc;
}

Matrix random_batch(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix x(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  return x;
}

}  // namespace

TEST_CASE("classifier rows sum to one, distance outputs stay in (0,1)") {
  Rng rng(1);
  Model clf(tiny_config(3, 4, Head::classifier));
  clf.init_params(2);
  Model dist(tiny_config(3, 4, Head::distance));
  dist.init_params(2);
  const Matrix x = random_batch(16, 3, rng);
  ForwardCache cache;
  const Matrix pc = forward(clf, x, &cache);
  for (std::size_t i = 0; i < pc.rows(); ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) s += pc(i, c);
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
  const Matrix pd = forward(dist, x, &cache);
  for (std::size_t i = 0; i < pd.rows() * pd.cols(); ++i) {
    CHECK(pd.data()[i] > 0.0);
    CHECK(pd.data()[i] < 1.0);
  }
}

TEST_CASE("eval forward is row independent") {
  Rng rng(3);
  Model m(tiny_config(5, 2, Head::distance));
  m.init_params(7);
  const Matrix x = random_batch(2, 5, rng);
  ForwardCache cache;
  const Matrix both = forward(m, x, &cache);
  for (std::size_t i = 0; i < 2; ++i) {
    Matrix one(1, 5);
    std::copy(x.row(i), x.row(i) + 5, one.row(0));
    const Matrix y = forward(m, one, &cache);
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(std::fabs(y(0, c) - both(i, c)) < 1e-12);
    }
  }
}

TEST_CASE("train-mode forward rejects single-row batches") {
  Model m(tiny_config(3, 2, Head::distance));
  m.init_params(1);
  CHECK_THROWS_AS((void)forward_train(m, Matrix(1, 3), nullptr), Error);
}

TEST_CASE("loss values match independent recomputation") {
  Rng rng(9);
  const std::size_t B = 7, C = 3;
  Matrix out(B, C), tgt(B, C);
  std::vector<std::uint8_t> labels(B);
  for (std::size_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      out(i, c) = rng.uniform(0.05, 1.0);
      s += out(i, c);
      tgt(i, c) = rng.uniform();
    }
    for (std::size_t c = 0; c < C; ++c) out(i, c) /= s;
    labels[i] = static_cast<std::uint8_t>(rng.index(C));
  }

  SUBCASE("mse") {
    double want = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        want += (out(i, c) - tgt(i, c)) * (out(i, c) - tgt(i, c));
      }
    }
    want /= B * C;
    CHECK(std::fabs(loss_value(out, LossKind::mse, &tgt, nullptr) - want) < 1e-12);
    CHECK(loss_value(out, LossKind::mse, &out, nullptr) == 0.0);
  }
  SUBCASE("cross entropy") {
    double want = 0.0;
    for (std::size_t i = 0; i < B; ++i) want += -std::log(out(i, labels[i]));
    want /= B;
    CHECK(std::fabs(loss_value(out, LossKind::cross_entropy, nullptr, &labels) - want) <
          1e-12);
  }
  SUBCASE("uniform softmax gives ln 2 for two classes") {
    Matrix u(4, 2);
    for (std::size_t i = 0; i < 8; ++i) u.data()[i] = 0.5;
    std::vector<std::uint8_t> l(4, 0);
    CHECK(std::fabs(loss_value(u, LossKind::cross_entropy, nullptr, &l) -
                    std::log(2.0)) < 1e-12);
  }
  SUBCASE("bad label is rejected") {
    std::vector<std::uint8_t> l(B, 9);
    CHECK_THROWS_AS((void)loss_value(out, LossKind::cross_entropy, nullptr, &l), Error);
  }
}

TEST_CASE("softmax head backward equals the analytic cross-entropy chain") {
  // for dY from cross-entropy, p (dY - dY.p) must equal (p - onehot)/B
  Rng rng(31);
  const std::size_t B = 5, C = 3;
  Matrix p(B, C);
  std::vector<std::uint8_t> labels(B);
  for (std::size_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      p(i, c) = rng.uniform(0.05, 1.0);
      s += p(i, c);
    }
    for (std::size_t c = 0; c < C; ++c) p(i, c) /= s;
    labels[i] = static_cast<std::uint8_t>(rng.index(C));
  }
  const Matrix dy = loss_grad(p, LossKind::cross_entropy, nullptr, &labels);
  for (std::size_t i = 0; i < B; ++i) {
    double dot = 0.0;
    for (std::size_t c = 0; c < C; ++c) dot += dy(i, c) * p(i, c);
    for (std::size_t c = 0; c < C; ++c) {
      const double chained = p(i, c) * (dy(i, c) - dot);
      const double onehot = labels[i] == c ? 1.0 : 0.0;
      CHECK(std::fabs(chained - (p(i, c) - onehot) / B) < 1e-12);
    }
  }
}

TEST_CASE("gradients match finite differences") {
  Rng rng(77);
  int instance = 0;
  for (Head head : {Head::distance, Head::classifier}) {
    for (LossKind loss : {LossKind::mse, LossKind::cross_entropy}) {
      for (bool train : {true, false}) {
        ++instance;
        const std::size_t n = 4, C = 2, B = 5;
        Model m(tiny_config(n, C, head));
        m.init_params(100 + instance);
        // push running stats off their init so eval mode is non-trivial
        Model warm = m;
        (void)forward_train(warm, random_batch(8, n, rng), nullptr);
        m = warm;
        m.train_mode = false;

        const Matrix x = random_batch(B, n, rng);
        Matrix tgt(B, C);
        std::vector<std::uint8_t> labels(B);
        for (std::size_t i = 0; i < B; ++i) {
          for (std::size_t c = 0; c < C; ++c) tgt(i, c) = rng.uniform();
          labels[i] = static_cast<std::uint8_t>(rng.index(C));
        }
        const FdReport rep = finite_difference_check(
            m, x, loss, loss == LossKind::mse ? &tgt : nullptr,
            loss == LossKind::mse ? nullptr : &labels, train);
        INFO("head=", head == Head::distance ? "distance" : "classifier",
             " loss=", loss == LossKind::mse ? "mse" : "xent", " train=", train,
             " worst=", rep.worst_rel);
        CHECK(rep.worst_rel < 1e-4);
        CHECK(rep.checked > 0);
      }
    }
  }
}

TEST_CASE("zero upstream gradient yields zero gradients") {
  Rng rng(5);
  Model m(tiny_config(4, 2, Head::distance));
  m.init_params(8);
  const Matrix x = random_batch(6, 4, rng);
  ForwardCache cache;
  m.train_mode = true;
  (void)forward_train(m, x, &cache);
  std::vector<double> grads;
  Matrix d_input;
  backward(m, cache, Matrix(6, 2), &grads, &d_input);
  for (double g : grads) CHECK(g == 0.0);
  for (double g : d_input.values()) CHECK(g == 0.0);
}

TEST_CASE("batch norm normalizes train-mode activations") {
  Rng rng(6);
  Model m(tiny_config(3, 2, Head::distance));
  m.init_params(4);
  const Matrix x = random_batch(64, 3, rng);
  ForwardCache cache;
  (void)forward_train(m, x, &cache);
  // xhat of every fcb layer has batch mean ~0 and variance ~1
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    if (!m.layers[li].has_bn) continue;
    const Matrix& xh = cache.layers[li].xhat;
    for (std::size_t j = 0; j < xh.cols(); ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < xh.rows(); ++i) mean += xh(i, j);
      mean /= xh.rows();
      double var = 0.0;
      for (std::size_t i = 0; i < xh.rows(); ++i) {
        var += (xh(i, j) - mean) * (xh(i, j) - mean);
      }
      var /= xh.rows();
      CHECK(std::fabs(mean) < 1e-7);
      CHECK(std::fabs(var - 1.0) < 1e-3);  // eps shifts variance slightly
    }
  }
}

TEST_CASE("knee schedule") {
  TrainConfig cfg;
  cfg.lr_max = 2.0;
  cfg.epochs = 1000;
  cfg.warmup_end = 10;
  cfg.decay_start = 700;
  cfg.decay_end = 1000;
  CHECK(knee_lr(0.0, cfg) == 0.0);
  CHECK(knee_lr(10.0, cfg) == 2.0);
  CHECK(knee_lr(350.0, cfg) == 2.0);
  CHECK(knee_lr(700.0, cfg) == 2.0);
  CHECK(knee_lr(850.0, cfg) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(knee_lr(1000.0, cfg) == 0.0);
  // piecewise linear between knots
  CHECK(knee_lr(5.0, cfg) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(knee_lr(925.0, cfg) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("adam") {
  TrainConfig cfg;
  cfg.lr_max = 1e-3;
  Model m(tiny_config(2, 2, Head::distance));
  m.init_params(3);
  const std::vector<double> before = m.params;

  SUBCASE("zero gradients leave parameters unchanged") {
    AdamState st;
    adam_step(m, std::vector<double>(m.param_count(), 0.0), st, 1e-3, cfg);
    CHECK(m.params == before);
  }
  SUBCASE("first step is -lr for unit gradient") {
    AdamState st;
    std::vector<double> g(m.param_count(), 0.0);
    g[0] = 1.0;
    g[1] = -1.0;
    adam_step(m, g, st, 1e-3, cfg);
    CHECK(std::fabs((m.params[0] - before[0]) + 1e-3) < 1e-9);
    CHECK(std::fabs((m.params[1] - before[1]) - 1e-3) < 1e-9);
    for (std::size_t i = 2; i < m.param_count(); ++i) CHECK(m.params[i] == before[i]);
  }
  SUBCASE("non-finite gradient is a divergence error") {
    AdamState st;
    std::vector<double> g(m.param_count(), 0.0);
    g[0] = std::nan("");
    CHECK_THROWS_AS(adam_step(m, g, st, 1e-3, cfg), Error);
  }
}

namespace {

TrainConfig quick_train_config(std::size_t epochs, double lr, std::size_t batch) {
  TrainConfig tc;
  tc.lr_max = lr;
  tc.batch_size = batch;
  tc.epochs = epochs;
  tc.warmup_end = 1;
  tc.decay_start = static_cast<double>(epochs) * 0.7;
  tc.decay_end = static_cast<double>(epochs);
  tc.seed = 5;
  return tc;
}

}  // namespace

TEST_CASE("training reduces the loss and is deterministic") {
  // toy distance field: two separated cluster centers in 2d
  Rng rng(123);
  const std::size_t N = 256;
  Matrix x(N, 2), t(N, 2);
  for (std::size_t i = 0; i < N; ++i) {
    const bool right = i % 2 == 0;
    x(i, 0) = (right ? 0.7 : 0.3) + 0.02 * rng.normal();
    x(i, 1) = 0.5 + 0.02 * rng.normal();
    t(i, 0) = right ? 0.1 : 0.9;
    t(i, 1) = right ? 0.9 : 0.1;
  }
  ModelConfig mc = tiny_config(2, 2, Head::distance);
  mc.width = 16;
  TrainData data;
  data.points = &x;
  data.targets = &t;
  const TrainConfig tc = quick_train_config(60, 2e-3, 64);
  TrainResult a = train(ModelKind::distance_learner, mc, data, tc);
  CHECK(a.epoch_loss.back() < a.epoch_loss.front() / 10.0);

  TrainResult b = train(ModelKind::distance_learner, mc, data, tc);
  CHECK(a.model.params == b.model.params);
  CHECK(a.model.running == b.model.running);
}

TEST_CASE("robust training with eta zero matches standard training") {
  Rng rng(9);
  const std::size_t N = 128;
  Matrix x(N, 2);
  std::vector<std::uint8_t> y(N);
  for (std::size_t i = 0; i < N; ++i) {
    y[i] = static_cast<std::uint8_t>(i % 2);
    x(i, 0) = (y[i] ? 0.7 : 0.3) + 0.05 * rng.normal();
    x(i, 1) = 0.5 + 0.05 * rng.normal();
  }
  ModelConfig mc = tiny_config(2, 2, Head::classifier);
  TrainData data;
  data.points = &x;
  data.labels = &y;
  TrainConfig tc = quick_train_config(10, 1e-3, 32);
  tc.loss = LossKind::cross_entropy;

  const TrainResult std_run = train(ModelKind::standard, mc, data, tc);
  tc.robust_eta = 0.0;
  const TrainResult rc_run = train(ModelKind::robust, mc, data, tc);
  CHECK(std_run.model.params == rc_run.model.params);

  // positive eta changes the trajectory
  tc.robust_eta = 0.05;
  const TrainResult rc2 = train(ModelKind::robust, mc, data, tc);
  CHECK(rc2.model.params != std_run.model.params);
}

TEST_SUITE_END();
