#include "mdl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mdl::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct RawEntry {
  std::string value;
  int line = 0;
  bool used = false;
};

class KeyReader {
 public:
  KeyReader(std::map<std::string, RawEntry>* raw, ExperimentConfig* cfg,
            const std::string& name)
      : raw_(raw), cfg_(cfg), name_(name) {}

  bool has(const std::string& key) {
    auto it = raw_->find(key);
    if (it == raw_->end()) return false;
    return true;
  }

  std::string str(const std::string& key, std::optional<std::string> def = {}) {
    auto it = raw_->find(key);
    if (it == raw_->end()) {
      if (!def) throw Error::config(name_ + ": missing required key '" + key + "'");
      note_default(key, *def);
      return *def;
    }
    it->second.used = true;
    cfg_->effective[key] = it->second.value;
    return it->second.value;
  }

  std::uint64_t u64(const std::string& key, std::optional<std::uint64_t> def = {}) {
    const std::string v = str(key, def ? std::optional<std::string>(std::to_string(*def))
                                       : std::nullopt);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
      throw Error::config(name_ + ":" + line_of(key) + ": '" + key +
                          "' expects an unsigned integer, got '" + v + "'");
    }
    return out;
  }

  double f64(const std::string& key, std::optional<double> def = {}) {
    std::optional<std::string> ds;
    if (def) {
      std::ostringstream os;
      os << *def;
      ds = os.str();
    }
    const std::string v = str(key, ds);
    try {
      std::size_t pos = 0;
      const double out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw Error::config(name_ + ":" + line_of(key) + ": '" + key +
                          "' expects a number, got '" + v + "'");
    }
  }

  bool boolean(const std::string& key, bool def) {
    const std::string v = str(key, std::optional<std::string>(def ? "true" : "false"));
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error::config(name_ + ":" + line_of(key) + ": '" + key +
                        "' expects true/false, got '" + v + "'");
  }

  std::vector<double> f64_list(const std::string& key, const std::string& def) {
    const std::string v = str(key, std::optional<std::string>(def));
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        std::size_t pos = 0;
        out.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw Error::config(name_ + ":" + line_of(key) + ": '" + key +
                            "' has a non-numeric entry '" + item + "'");
      }
    }
    return out;
  }

  std::vector<std::string> str_list(const std::string& key, const std::string& def) {
    const std::string v = str(key, std::optional<std::string>(def));
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  std::string line_of(const std::string& key) const {
    auto it = raw_->find(key);
    return it == raw_->end() ? "?" : std::to_string(it->second.line);
  }

  void check_all_used() const {
    for (const auto& [key, entry] : *raw_) {
      if (!entry.used) {
        throw Error::config(name_ + ":" + std::to_string(entry.line) +
                            ": unknown key '" + key + "'");
      }
    }
  }

 private:
  void note_default(const std::string& key, const std::string& value) {
    cfg_->effective[key] = value;
    cfg_->applied_defaults.push_back(key + " = " + value);
  }

  std::map<std::string, RawEntry>* raw_;
  ExperimentConfig* cfg_;
  std::string name_;
};

}  // namespace

nn::TrainConfig ExperimentConfig::train_config_for(nn::ModelKind kind) const {
  nn::TrainConfig tc = train;
  std::size_t epochs = train.epochs;
  switch (kind) {
    case nn::ModelKind::distance_learner:
      if (dl_epochs > 0) epochs = dl_epochs;
      break;
    case nn::ModelKind::standard:
      if (sc_epochs > 0) epochs = sc_epochs;
      break;
    case nn::ModelKind::robust:
      if (rc_epochs > 0) epochs = rc_epochs;
      break;
  }
  if (epochs != train.epochs) {
    const double f = static_cast<double>(epochs) / static_cast<double>(train.epochs);
    tc.epochs = epochs;
    tc.warmup_end = train.warmup_end * f;
    tc.decay_start = train.decay_start * f;
    tc.decay_end = static_cast<double>(epochs);
  }
  tc.loss = kind == nn::ModelKind::distance_learner ? nn::LossKind::mse
                                                    : nn::LossKind::cross_entropy;
  return tc;
}

std::string ExperimentConfig::fingerprint(const std::vector<std::string>& sections) const {
  std::string acc;
  for (const auto& [key, value] : effective) {
    for (const auto& sec : sections) {
      if (key.rfind(sec + ".", 0) == 0) {
        acc += key;
        acc += '=';
        acc += value;
        acc += '\n';
        break;
      }
    }
  }
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : acc) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& name) {
  std::map<std::string, RawEntry> raw;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error::config(name + ":" + std::to_string(lineno) +
                          ": expected 'section.key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.find('.') == std::string::npos) {
      throw Error::config(name + ":" + std::to_string(lineno) +
                          ": key '" + key + "' is missing its section prefix");
    }
    auto [it, inserted] = raw.emplace(key, RawEntry{value, lineno, false});
    if (!inserted) {
      throw Error::config(name + ": duplicate key '" + key + "' on lines " +
                          std::to_string(it->second.line) + " and " +
                          std::to_string(lineno));
    }
  }

  ExperimentConfig cfg;
  KeyReader r(&raw, &cfg, name);

  // dataset
  cfg.dataset_kind = r.str("dataset.kind");
  if (cfg.dataset_kind != "separated_spheres" && cfg.dataset_kind != "concentric_spheres" &&
      cfg.dataset_kind != "swiss_rolls") {
    throw Error::config(name + ":" + r.line_of("dataset.kind") +
                        ": unknown dataset kind '" + cfg.dataset_kind + "'");
  }
  cfg.m = r.u64("dataset.m");
  cfg.n = r.u64("dataset.n");
  if (cfg.m < 1 || cfg.n <= cfg.m) {
    throw Error::config(name + ": dataset dimensions need n > m >= 1");
  }
  cfg.train_per_class = r.u64("dataset.train_per_class");
  cfg.test_per_class = r.u64("dataset.test_per_class", 0);
  if (cfg.train_per_class == 0) {
    throw Error::config(name + ": dataset.train_per_class must be positive");
  }
  cfg.seed = r.u64("dataset.seed", 7);

  // augment
  cfg.augment.max_norm = r.f64("augment.max_norm");
  cfg.augment.max_tangent = r.f64("augment.max_tangent", 0.0);
  cfg.augment.high_distance = r.f64("augment.high_distance", 1.0);
  cfg.augment.k_neighbors = r.u64("augment.k_neighbors", 0);
  const std::string chart = r.str("augment.chart_source", std::string("inferred"));
  if (chart == "inferred") {
    cfg.augment.chart_source = manifold::ChartSource::inferred;
  } else if (chart == "analytic") {
    cfg.augment.chart_source = manifold::ChartSource::analytic;
  } else {
    throw Error::config(name + ":" + r.line_of("augment.chart_source") +
                        ": chart_source must be inferred or analytic");
  }
  cfg.augment.symmetric_coeffs = r.boolean("augment.symmetric_coeffs", false);
  cfg.n_on = r.u64("augment.n_on");
  cfg.n_off = r.u64("augment.n_off");
  cfg.test_on = r.u64("augment.test_on", 0);
  cfg.test_off = r.u64("augment.test_off", 0);
  cfg.augment.validate(cfg.m);

  // train
  for (const std::string& mk : r.str_list("train.models", "dl,sc")) {
    cfg.models.push_back(nn::model_kind_from_string(mk));
  }
  cfg.train.lr_max = r.f64("train.lr");
  cfg.train.batch_size = r.u64("train.batch_size");
  cfg.train.epochs = r.u64("train.epochs");
  cfg.train.warmup_end = r.f64("train.warmup_end", 10.0);
  cfg.train.decay_start = r.f64("train.decay_start", 700.0);
  cfg.train.decay_end = static_cast<double>(cfg.train.epochs);
  cfg.train.adam_beta1 = r.f64("train.adam_beta1", 0.9);
  cfg.train.adam_beta2 = r.f64("train.adam_beta2", 0.999);
  cfg.train.adam_eps = r.f64("train.adam_eps", 1e-8);
  cfg.train.seed = r.u64("train.seed", 1);
  cfg.width = r.u64("train.width", 512);
  cfg.robust_etas = r.f64_list("train.robust_eta", "");
  cfg.train.robust_steps = r.u64("train.robust_steps", 40);
  cfg.train.robust_step_size = r.f64("train.robust_step_size", 0.0);
  cfg.dl_epochs = r.u64("train.dl_epochs", 0);
  cfg.sc_epochs = r.u64("train.sc_epochs", 0);
  cfg.rc_epochs = r.u64("train.rc_epochs", 0);
  if (cfg.train.decay_start > cfg.train.decay_end) {
    throw Error::config(name + ": train.decay_start exceeds the epoch count");
  }
  cfg.train.validate();
  const bool wants_rc =
      std::find(cfg.models.begin(), cfg.models.end(), nn::ModelKind::robust) !=
      cfg.models.end();
  if (wants_rc && cfg.robust_etas.empty()) {
    throw Error::config(name + ": train.models includes rc but train.robust_eta is empty");
  }

  // attack
  cfg.attack_epsilons = r.f64_list("attack.epsilons", "");
  for (double e : cfg.attack_epsilons) {
    if (e < 0.0) throw Error::config(name + ": attack epsilons must be non-negative");
  }
  cfg.attack_cfg.steps = r.u64("attack.steps", 100);
  cfg.attack_cfg.step_size = r.f64("attack.step_size", 5e-3);
  cfg.attack_cfg.random_start = r.boolean("attack.random_start", false);
  cfg.attack_cfg.seed = r.u64("attack.seed", 3);
  cfg.attack_test_count = r.u64("attack.test_count", 1000);
  cfg.attack_cfg.epsilon = 0.0;
  cfg.attack_cfg.validate();

  // eval
  const double tol = r.f64("eval.tol", 0.0);
  if (tol > 0.0) cfg.tol = tol;
  cfg.grid_lo = r.f64("eval.grid_lo", -0.75);
  cfg.grid_hi = r.f64("eval.grid_hi", 0.75);
  cfg.grid_res = r.u64("eval.grid_res", 200);
  if (cfg.grid_hi <= cfg.grid_lo || cfg.grid_res < 2) {
    throw Error::config(name + ": eval grid extent/resolution invalid");
  }
  const double clip = r.f64("eval.clip_above", 0.0);
  if (clip > 0.0) cfg.clip_above = clip;

  cfg.workdir = r.str("paths.workdir", std::string(""));

  r.check_all_used();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error::config("cannot read config file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  ExperimentConfig cfg = parse_config_text(ss.str(), path);
  return cfg;
}

}  // namespace mdl::cli
