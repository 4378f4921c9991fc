#include "mdl/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "mdl/rng.hpp"

namespace mdl::attack {

AttackLoss attack_loss_from_string(const std::string& s) {
  if (s == "xent_ascent" || s == "xent") return AttackLoss::xent_ascent;
  if (s == "distance_margin" || s == "margin") return AttackLoss::distance_margin;
  throw Error::config("unknown attack loss: " + s);
}

void AttackConfig::validate() const {
  if (epsilon < 0.0) throw Error::config("attack: epsilon must be non-negative");
  if (steps < 1) throw Error::config("attack: steps must be >= 1");
  if (step_size <= 0.0) throw Error::config("attack: step size must be positive");
}

Objective attack_objective(const nn::Model& model, const Matrix& x,
                           const std::vector<std::uint8_t>& y, AttackLoss spec) {
  if (model.train_mode) throw Error::unsupported("attack: model must be in eval mode");
  const std::size_t B = x.rows();
  const std::size_t C = model.cfg.classes;
  if (y.size() != B) throw Error::dimension("attack: label count mismatch");

  nn::ForwardCache cache;
  const Matrix& out = nn::forward(model, x, &cache);

  Objective obj;
  obj.value.resize(B);
  Matrix dy(B, C);
  if (spec == AttackLoss::xent_ascent) {
    for (std::size_t i = 0; i < B; ++i) {
      const std::size_t label = y[i];
      if (label >= C) throw Error::dimension("attack: label out of range");
      const double p = std::max(out(i, label), 1e-300);
      obj.value[i] = -std::log(p);
      dy(i, label) = -1.0 / p;
    }
  } else {
    for (std::size_t i = 0; i < B; ++i) {
      const std::size_t label = y[i];
      if (label >= C) throw Error::dimension("attack: label out of range");
      std::size_t other = label == 0 ? 1 : 0;
      for (std::size_t c = 0; c < C; ++c) {
        if (c != label && out(i, c) < out(i, other)) other = c;
      }
      obj.value[i] = out(i, label) - out(i, other);
      dy(i, label) = 1.0;
      dy(i, other) = -1.0;
    }
  }
  nn::backward(model, cache, dy, nullptr, &obj.grad);
  if (!obj.grad.all_finite()) throw Error::numeric("attack failed: non-finite gradient");
  return obj;
}

Matrix pgd_attack(const nn::Model& model, const Matrix& x,
                  const std::vector<std::uint8_t>& y, const AttackConfig& cfg) {
  cfg.validate();
  if (!x.all_finite()) throw Error::data("attack: non-finite input");
  const std::size_t B = x.rows();
  const std::size_t n = x.cols();

  Matrix cur = x;
  if (cfg.random_start && cfg.epsilon > 0.0) {
    for (std::size_t i = 0; i < B; ++i) {
      Rng rng(derive_seed(derive_seed(cfg.seed, streams::attack), i));
      std::vector<double> dir(n);
      double nrm = 0.0;
      do {
        for (auto& v : dir) v = rng.normal();
        nrm = norm2(dir.data(), n);
      } while (nrm == 0.0);
      const double radius =
          cfg.epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
      double* row = cur.row(i);
      for (std::size_t j = 0; j < n; ++j) row[j] += radius * dir[j] / nrm;
    }
  }

  Matrix best = cur;
  std::vector<double> best_val(B, -std::numeric_limits<double>::infinity());

  auto track_best = [&](const Objective& obj) {
    for (std::size_t i = 0; i < B; ++i) {
      if (obj.value[i] > best_val[i]) {
        best_val[i] = obj.value[i];
        std::copy(cur.row(i), cur.row(i) + n, best.row(i));
      }
    }
  };

  for (std::size_t it = 0; it < cfg.steps; ++it) {
    const Objective obj = attack_objective(model, cur, y, cfg.loss_spec);
    track_best(obj);
    for (std::size_t i = 0; i < B; ++i) {
      const double* g = obj.grad.row(i);
      const double gn = norm2(g, n);
      double* row = cur.row(i);
      if (gn > 0.0) {
        for (std::size_t j = 0; j < n; ++j) row[j] += cfg.step_size * g[j] / gn;
      }
      double dn = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = row[j] - x(i, j);
        dn += d * d;
      }
      dn = std::sqrt(dn);
      if (dn > cfg.epsilon) {
        const double f = cfg.epsilon / dn;
        for (std::size_t j = 0; j < n; ++j) row[j] = x(i, j) + f * (row[j] - x(i, j));
      }
    }
  }
  track_best(attack_objective(model, cur, y, cfg.loss_spec));
  return best;
}

std::vector<double> pgd_attack_point(const nn::Model& model, const std::vector<double>& x,
                                     std::uint8_t y, const AttackConfig& cfg) {
  Matrix xs(1, x.size());
  std::copy(x.begin(), x.end(), xs.row(0));
  const Matrix adv = pgd_attack(model, xs, {y}, cfg);
  return {adv.row(0), adv.row(0) + x.size()};
}

RobustnessReport robustness_sweep(const std::vector<SweepModel>& models,
                                  const Matrix& points,
                                  const std::vector<std::uint8_t>& labels,
                                  const std::vector<double>& epsilons,
                                  const AttackConfig& base) {
  if (points.rows() != labels.size()) {
    throw Error::dimension("sweep: points/labels mismatch");
  }
  std::vector<double> eps = epsilons;
  std::sort(eps.begin(), eps.end());

  RobustnessReport report;
  const std::size_t N = points.rows();
  for (const SweepModel& sm : models) {
    if (!sm.model) throw Error::data("sweep: null model");
    if (sm.model->cfg.input_dim != points.cols()) {
      throw Error::dimension("sweep: model/testset dimension mismatch");
    }

    const double clean_err = eval::classification_error(*sm.model, points, labels, sm.rule);
    const double clean_acc = 1.0 - clean_err;

    // carried attack state: a row stays broken once any feasible
    // perturbation found at a smaller radius misclassified it
    std::vector<std::uint8_t> broken(N, 0);
    std::vector<int> broken_decision(N, 0);

    nn::ForwardCache cache;
    for (const double e : eps) {
      AttackConfig cfg = base;
      cfg.epsilon = e;
      cfg.loss_spec = sm.loss_spec;
      const Matrix adv = pgd_attack(*sm.model, points, labels, cfg);
      const Matrix& out = nn::forward(*sm.model, adv, &cache);
      for (std::size_t i = 0; i < N; ++i) {
        if (broken[i]) continue;
        const int d = eval::decide(out.row(i), out.cols(), sm.rule);
        if (d != static_cast<int>(labels[i])) {
          broken[i] = 1;
          broken_decision[i] = d;
        }
      }
      std::size_t ok = 0, ood = 0;
      for (std::size_t i = 0; i < N; ++i) {
        if (!broken[i]) {
          ++ok;
        } else if (broken_decision[i] == eval::kOutOfDomain) {
          ++ood;
        }
      }
      RobustnessRow row;
      row.model = sm.name;
      row.epsilon = e;
      row.clean_accuracy = clean_acc;
      row.adversarial_accuracy = static_cast<double>(ok) / static_cast<double>(N);
      if (sm.rule.distance_rule) {
        row.ood_rate = static_cast<double>(ood) / static_cast<double>(N);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

void write_robustness_csv(const RobustnessReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error::data("cannot write " + path);
  f << "model,epsilon,clean_acc,adv_acc,ood_rate\n";
  char buf[160];
  for (const auto& r : report.rows) {
    if (r.ood_rate) {
      std::snprintf(buf, sizeof(buf), "%s,%.12g,%.12g,%.12g,%.12g\n", r.model.c_str(),
                    r.epsilon, r.clean_accuracy, r.adversarial_accuracy, *r.ood_rate);
    } else {
      std::snprintf(buf, sizeof(buf), "%s,%.12g,%.12g,%.12g,\n", r.model.c_str(),
                    r.epsilon, r.clean_accuracy, r.adversarial_accuracy);
    }
    f << buf;
  }
}

}  // namespace mdl::attack
