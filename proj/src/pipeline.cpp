#include "mdl/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mdl/datagen.hpp"
#include "mdl/evaluate.hpp"
#include "mdl/rng.hpp"
#include "mdl/serialize.hpp"

namespace mdl::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Stage s) {
  switch (s) {
    case Stage::gen: return "gen";
    case Stage::augment: return "augment";
    case Stage::train: return "train";
    case Stage::attack: return "attack";
    case Stage::eval: return "eval";
  }
  return "?";
}

std::vector<Stage> parse_stages(const std::string& csv) {
  std::vector<Stage> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "gen") {
      out.push_back(Stage::gen);
    } else if (item == "augment") {
      out.push_back(Stage::augment);
    } else if (item == "train") {
      out.push_back(Stage::train);
    } else if (item == "attack") {
      out.push_back(Stage::attack);
    } else if (item == "eval") {
      out.push_back(Stage::eval);
    } else {
      throw Error::config("unknown stage '" + item + "'");
    }
  }
  return out;
}

namespace artifacts {
std::string checkpoint(nn::ModelKind kind, std::size_t robust_index) {
  switch (kind) {
    case nn::ModelKind::distance_learner: return "dl.ckpt";
    case nn::ModelKind::standard: return "sc.ckpt";
    case nn::ModelKind::robust: return "rc_" + std::to_string(robust_index) + ".ckpt";
  }
  return "?";
}
}  // namespace artifacts

std::vector<std::size_t> train_pool(const ExperimentConfig& cfg) {
  std::vector<std::size_t> pool;
  const std::size_t per_class = cfg.train_per_class + cfg.test_per_class;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < cfg.train_per_class; ++i) pool.push_back(c * per_class + i);
  }
  return pool;
}

std::vector<std::size_t> test_pool(const ExperimentConfig& cfg) {
  std::vector<std::size_t> pool;
  const std::size_t per_class = cfg.train_per_class + cfg.test_per_class;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < cfg.test_per_class; ++i) {
      pool.push_back(c * per_class + cfg.train_per_class + i);
    }
  }
  return pool;
}

namespace {

class WorkdirLock {
 public:
  explicit WorkdirLock(const std::string& workdir) {
    const std::string path = workdir + "/.mdl.lock";
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw Error::data("cannot open lock file " + path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error::data("workdir " + workdir + " is in use by another pipeline process");
    }
  }
  ~WorkdirLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }

 private:
  int fd_ = -1;
};

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Manifest {
  json root;

  static Manifest load(const std::string& path) {
    Manifest m;
    std::ifstream f(path);
    if (f) {
      try {
        f >> m.root;
      } catch (const std::exception&) {
        m.root = json::object();  // corrupt manifest: rebuild from scratch
      }
    }
    if (!m.root.contains("stages")) m.root["stages"] = json::object();
    return m;
  }

  void save(const std::string& path) const {
    std::ofstream f(path);
    f << root.dump(2) << "\n";
  }

  bool stage_current(const std::string& stage, const std::string& inputs,
                     const std::string& workdir) const {
    const auto& stages = root.at("stages");
    if (!stages.contains(stage)) return false;
    const auto& rec = stages.at(stage);
    if (rec.value("inputs", "") != inputs) return false;
    for (const auto& [file, hash] : rec.at("outputs").items()) {
      const std::string path = workdir + "/" + file;
      if (!fs::exists(path)) return false;
      if (hash_hex(serialize::file_hash(path)) != hash.get<std::string>()) return false;
    }
    return true;
  }

  void record(const std::string& stage, const std::string& inputs,
              const std::vector<std::string>& outputs, const std::string& workdir,
              std::uint64_t seed, long wall_ms) {
    json rec;
    rec["inputs"] = inputs;
    rec["seed"] = seed;
    rec["wall_ms"] = wall_ms;
    json outs = json::object();
    for (const auto& file : outputs) {
      outs[file] = hash_hex(serialize::file_hash(workdir + "/" + file));
    }
    rec["outputs"] = outs;
    root["stages"][stage] = rec;
  }
};

void require_artifact(const std::string& workdir, const std::string& name,
                      const std::string& stage) {
  if (!fs::exists(workdir + "/" + name)) {
    throw Error::dependency("stage " + stage + " needs " + name +
                            "; run the producing stage first");
  }
}

std::string input_fingerprint(const ExperimentConfig& cfg,
                              const std::vector<std::string>& sections,
                              const std::vector<std::string>& files,
                              const std::string& workdir, const std::string& extra = "") {
  std::string acc = cfg.fingerprint(sections) + extra;
  for (const auto& f : files) {
    acc += f + ":" + hash_hex(serialize::file_hash(workdir + "/" + f)) + ";";
  }
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : acc) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return hash_hex(h);
}

nn::ModelConfig model_config(const ExperimentConfig& cfg, nn::ModelKind kind) {
  nn::ModelConfig mc;
  mc.input_dim = cfg.n;
  mc.classes = 2;
  mc.width = cfg.width;
  mc.head = kind == nn::ModelKind::distance_learner ? nn::Head::distance
                                                    : nn::Head::classifier;
  return mc;
}

struct ClassifierData {
  Matrix points;
  std::vector<std::uint8_t> labels;
};

ClassifierData on_manifold_rows(const manifold::TrainingSet& ts) {
  std::size_t count = 0;
  for (auto f : ts.on_manifold) count += f;
  ClassifierData out;
  out.points = Matrix(count, ts.points.cols());
  out.labels.resize(count);
  std::size_t k = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!ts.on_manifold[i]) continue;
    std::copy(ts.points.row(i), ts.points.row(i) + ts.points.cols(), out.points.row(k));
    out.labels[k] = ts.labels[i];
    ++k;
  }
  return out;
}

struct TestPoints {
  Matrix points;
  std::vector<std::uint8_t> labels;
};

TestPoints gather_test_points(const LabeledDataset& ds, const ExperimentConfig& cfg,
                              std::size_t limit) {
  const std::vector<std::size_t> pool = test_pool(cfg);
  if (pool.empty()) {
    throw Error::dependency("no held-out test points: set dataset.test_per_class");
  }
  std::vector<std::size_t> chosen;
  if (limit == 0 || limit >= pool.size()) {
    chosen = pool;
  } else {
    // balanced subsample: alternate classes through the split halves
    const std::size_t half = pool.size() / 2;
    for (std::size_t i = 0; i < limit; ++i) {
      const std::size_t c = i % 2;
      const std::size_t j = i / 2;
      chosen.push_back(pool[c * half + (j % half)]);
    }
  }
  TestPoints tp;
  tp.points = Matrix(chosen.size(), ds.ambient_dim);
  tp.labels.resize(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    std::copy(ds.points.row(chosen[i]), ds.points.row(chosen[i]) + ds.ambient_dim,
              tp.points.row(i));
    tp.labels[i] = ds.labels[chosen[i]];
  }
  return tp;
}

using Clock = std::chrono::steady_clock;

long ms_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
}

void run_gen(const ExperimentConfig& cfg, const PipelineOptions& opt,
             const std::string& wd, std::vector<std::string>* outputs) {
  LabeledDataset ds = datagen::make_dataset(
      cfg.dataset_kind, cfg.m, cfg.n, cfg.train_per_class + cfg.test_per_class, cfg.seed);
  const double gap = datagen::analytic_interclass_gap(ds);
  if (gap <= 2.0 * cfg.augment.max_norm) {
    std::fprintf(stderr,
                 "[gen] warning: inter-class gap %.4g <= 2*max_norm %.4g; "
                 "augmentation bands of the two classes overlap\n",
                 gap, 2.0 * cfg.augment.max_norm);
  }
  serialize::write_dataset(ds, wd + "/" + artifacts::dataset);
  outputs->push_back(artifacts::dataset);
  if (opt.emit_csv) {
    serialize::write_dataset_csv(ds, wd + "/" + artifacts::dataset_csv);
    outputs->push_back(artifacts::dataset_csv);
  }
  std::fprintf(stderr, "[gen] %zu points, n=%zu, gap=%.4g (normalized)\n", ds.size(),
               ds.ambient_dim, gap);
}

void run_augment(const ExperimentConfig& cfg, const std::string& wd,
                 std::vector<std::string>* outputs) {
  require_artifact(wd, artifacts::dataset, "augment");
  const LabeledDataset ds = serialize::read_dataset(wd + "/" + artifacts::dataset);
  const manifold::TrainingSet ts = manifold::build_training_set(
      ds, cfg.augment, cfg.n_on, cfg.n_off, derive_seed(cfg.seed, streams::trainset),
      train_pool(cfg));
  serialize::write_training_set(ts, ds, wd + "/" + artifacts::trainset);
  outputs->push_back(artifacts::trainset);
  std::fprintf(stderr, "[augment] trainset: %zu rows (%zu on, %zu off)\n", ts.size(),
               cfg.n_on, cfg.n_off);
  if (cfg.test_on + cfg.test_off > 0) {
    if (cfg.test_per_class == 0) {
      throw Error::config("augment.test_on/test_off need dataset.test_per_class > 0");
    }
    const manifold::TrainingSet band = manifold::build_training_set(
        ds, cfg.augment, cfg.test_on, cfg.test_off,
        derive_seed(cfg.seed, streams::testset), test_pool(cfg));
    serialize::write_training_set(band, ds, wd + "/" + artifacts::testset);
    outputs->push_back(artifacts::testset);
    std::fprintf(stderr, "[augment] testset: %zu rows\n", band.size());
  }
}

void run_train(const ExperimentConfig& cfg, const std::string& wd,
               std::vector<std::string>* outputs) {
  require_artifact(wd, artifacts::trainset, "train");
  const manifold::TrainingSet ts =
      serialize::read_training_set(wd + "/" + artifacts::trainset);
  const ClassifierData clf = on_manifold_rows(ts);

  for (nn::ModelKind kind : cfg.models) {
    const std::size_t eta_count =
        kind == nn::ModelKind::robust ? cfg.robust_etas.size() : 1;
    for (std::size_t ei = 0; ei < eta_count; ++ei) {
      nn::TrainConfig tc = cfg.train_config_for(kind);
      tc.seed = derive_seed(cfg.train.seed, static_cast<std::uint64_t>(kind) * 16 + ei);
      nn::TrainData data;
      if (kind == nn::ModelKind::distance_learner) {
        data.points = &ts.points;
        data.targets = &ts.targets;
      } else {
        data.points = &clf.points;
        data.labels = &clf.labels;
        if (kind == nn::ModelKind::robust) tc.robust_eta = cfg.robust_etas[ei];
      }
      const Clock::time_point t0 = Clock::now();
      nn::TrainResult res = nn::train(kind, model_config(cfg, kind), data, tc, true);

      json meta;
      meta["kind"] = nn::to_string(kind);
      meta["seed"] = tc.seed;
      meta["epochs"] = tc.epochs;
      meta["lr"] = tc.lr_max;
      meta["batch_size"] = tc.batch_size;
      meta["loss"] = tc.loss == nn::LossKind::mse ? "mse" : "cross_entropy";
      if (kind == nn::ModelKind::robust) meta["robust_eta"] = tc.robust_eta;
      meta["first_epoch_loss"] = res.epoch_loss.front();
      meta["final_loss"] = res.epoch_loss.back();

      const std::string name = artifacts::checkpoint(kind, ei);
      serialize::write_checkpoint(res.model, kind, meta.dump(), wd + "/" + name);
      outputs->push_back(name);
      std::fprintf(stderr, "[train] %s: final loss %.6g (%.1fs)\n", name.c_str(),
                   res.epoch_loss.back(), ms_since(t0) / 1000.0);
    }
  }
}

struct LoadedModels {
  std::vector<serialize::Checkpoint> checkpoints;
  std::vector<std::string> names;
  std::vector<std::size_t> eta_index;
};

LoadedModels load_models(const ExperimentConfig& cfg, const std::string& wd,
                         const std::string& stage) {
  LoadedModels lm;
  for (nn::ModelKind kind : cfg.models) {
    const std::size_t eta_count =
        kind == nn::ModelKind::robust ? cfg.robust_etas.size() : 1;
    for (std::size_t ei = 0; ei < eta_count; ++ei) {
      const std::string name = artifacts::checkpoint(kind, ei);
      require_artifact(wd, name, stage);
      lm.checkpoints.push_back(serialize::read_checkpoint(wd + "/" + name));
      if (kind == nn::ModelKind::robust) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "rc(eta=%g)", cfg.robust_etas[ei]);
        lm.names.push_back(buf);
      } else {
        lm.names.push_back(kind == nn::ModelKind::distance_learner ? "dl" : "sc");
      }
      lm.eta_index.push_back(ei);
    }
  }
  return lm;
}

eval::Rule rule_for(const ExperimentConfig& cfg, nn::ModelKind kind) {
  eval::Rule rule;
  if (kind == nn::ModelKind::distance_learner) {
    rule.distance_rule = true;
    rule.tol = cfg.tol;
  }
  return rule;
}

void run_attack(const ExperimentConfig& cfg, const std::string& wd,
                std::vector<std::string>* outputs) {
  if (cfg.attack_epsilons.empty()) {
    throw Error::config("attack stage requires attack.epsilons");
  }
  require_artifact(wd, artifacts::dataset, "attack");
  const LabeledDataset ds = serialize::read_dataset(wd + "/" + artifacts::dataset);
  const TestPoints tp = gather_test_points(ds, cfg, cfg.attack_test_count);
  const LoadedModels lm = load_models(cfg, wd, "attack");

  std::vector<attack::SweepModel> sweep;
  for (std::size_t i = 0; i < lm.checkpoints.size(); ++i) {
    attack::SweepModel sm;
    sm.model = &lm.checkpoints[i].model;
    sm.name = lm.names[i];
    sm.loss_spec = lm.checkpoints[i].kind == nn::ModelKind::distance_learner
                       ? attack::AttackLoss::distance_margin
                       : attack::AttackLoss::xent_ascent;
    sm.rule = rule_for(cfg, lm.checkpoints[i].kind);
    sweep.push_back(sm);
  }
  const attack::RobustnessReport report = attack::robustness_sweep(
      sweep, tp.points, tp.labels, cfg.attack_epsilons, cfg.attack_cfg);
  attack::write_robustness_csv(report, wd + "/" + artifacts::robustness);
  outputs->push_back(artifacts::robustness);
  for (const auto& row : report.rows) {
    std::fprintf(stderr, "[attack] %s eps=%.4g adv_acc=%.4f\n", row.model.c_str(),
                 row.epsilon, row.adversarial_accuracy);
  }
}

void run_eval(const ExperimentConfig& cfg, const PipelineOptions& opt,
              const std::string& wd, std::vector<std::string>* outputs) {
  require_artifact(wd, artifacts::dataset, "eval");
  const LabeledDataset ds = serialize::read_dataset(wd + "/" + artifacts::dataset);
  const LoadedModels lm = load_models(cfg, wd, "eval");

  std::optional<manifold::TrainingSet> band;
  if (cfg.test_on + cfg.test_off > 0) {
    require_artifact(wd, artifacts::testset, "eval");
    band = serialize::read_training_set(wd + "/" + artifacts::testset);
  }
  const TestPoints tp = gather_test_points(ds, cfg, 0);

  std::vector<eval::MetricsRow> rows;
  for (std::size_t i = 0; i < lm.checkpoints.size(); ++i) {
    const auto& ck = lm.checkpoints[i];
    eval::MetricsRow row;
    row.dataset = ds.kind_name;
    row.m = ds.intrinsic_dim;
    row.n = ds.ambient_dim;
    row.model = lm.names[i];
    const json meta = json::parse(ck.meta_json);
    row.train_mse = meta.value("final_loss", 0.0);
    if (ck.kind == nn::ModelKind::distance_learner && band) {
      row.test_mse = eval::distance_test_loss(ck.model, *band);
      row.test_count = band->size();
    } else {
      row.test_mse = std::nan("");
      row.test_count = 0;
    }
    row.clf_error =
        eval::classification_error(ck.model, tp.points, tp.labels, rule_for(cfg, ck.kind));
    rows.push_back(row);
    std::fprintf(stderr, "[eval] %s: test_mse=%.6g clf_error=%.6g\n", row.model.c_str(),
                 row.test_mse, row.clf_error);
  }
  eval::write_metrics_csv(rows, wd + "/" + artifacts::metrics);
  outputs->push_back(artifacts::metrics);

  const double span = cfg.grid_hi - cfg.grid_lo;
  eval::PlaneSpec plane =
      eval::default_plane(ds, cfg.grid_lo, cfg.grid_lo + span, cfg.grid_lo, cfg.grid_lo + span);
  plane.u_hi = cfg.grid_hi;
  plane.v_hi = cfg.grid_hi;
  for (std::size_t i = 0; i < lm.checkpoints.size(); ++i) {
    eval::SliceGrid grid = eval::build_slice_grid(plane, cfg.grid_res, cfg.grid_res);
    eval::evaluate_grid(lm.checkpoints[i].model, &grid, rule_for(cfg, lm.checkpoints[i].kind));
    std::string base = "grid_" + lm.names[i];
    for (auto& ch : base) {
      if (ch == '(' || ch == ')' || ch == '=') ch = '_';
    }
    eval::write_grid_csv(grid, wd + "/" + base + ".csv", false, cfg.clip_above);
    outputs->push_back(base + ".csv");
    if (opt.emit_ppm) {
      eval::write_grid_ppm(grid, wd + "/" + base + ".ppm", 0);
      outputs->push_back(base + ".ppm");
    }
  }
}

}  // namespace

void run_pipeline(const ExperimentConfig& cfg, const std::vector<Stage>& stages,
                  const PipelineOptions& opt) {
  if (cfg.workdir.empty()) throw Error::config("no workdir configured");
  fs::create_directories(cfg.workdir);
  WorkdirLock lock(cfg.workdir);
  const std::string wd = cfg.workdir;
  const std::string manifest_path = wd + "/" + artifacts::manifest;
  Manifest manifest = Manifest::load(manifest_path);

  for (const std::string& line : cfg.applied_defaults) {
    std::fprintf(stderr, "[config] default applied: %s\n", line.c_str());
  }

  const Stage order[] = {Stage::gen, Stage::augment, Stage::train, Stage::attack,
                         Stage::eval};
  for (Stage stage : order) {
    if (std::find(stages.begin(), stages.end(), stage) == stages.end()) continue;
    const std::string name = to_string(stage);

    std::string inputs;
    switch (stage) {
      case Stage::gen:
        inputs = input_fingerprint(cfg, {"dataset"}, {}, wd, opt.emit_csv ? "csv" : "");
        break;
      case Stage::augment:
        inputs = input_fingerprint(cfg, {"dataset", "augment"}, {artifacts::dataset}, wd);
        break;
      case Stage::train:
        inputs = input_fingerprint(cfg, {"train"}, {artifacts::trainset}, wd);
        break;
      case Stage::attack: {
        std::vector<std::string> files = {artifacts::dataset};
        for (nn::ModelKind kind : cfg.models) {
          const std::size_t ec = kind == nn::ModelKind::robust ? cfg.robust_etas.size() : 1;
          for (std::size_t ei = 0; ei < ec; ++ei) {
            const std::string f = artifacts::checkpoint(kind, ei);
            if (fs::exists(wd + "/" + f)) files.push_back(f);
          }
        }
        inputs = input_fingerprint(cfg, {"attack", "eval"}, files, wd);
        break;
      }
      case Stage::eval: {
        std::vector<std::string> files = {artifacts::dataset};
        if (fs::exists(wd + "/" + artifacts::testset)) files.push_back(artifacts::testset);
        for (nn::ModelKind kind : cfg.models) {
          const std::size_t ec = kind == nn::ModelKind::robust ? cfg.robust_etas.size() : 1;
          for (std::size_t ei = 0; ei < ec; ++ei) {
            const std::string f = artifacts::checkpoint(kind, ei);
            if (fs::exists(wd + "/" + f)) files.push_back(f);
          }
        }
        inputs = input_fingerprint(cfg, {"eval"}, files, wd, opt.emit_ppm ? "ppm" : "");
        break;
      }
    }

    if (!opt.force && manifest.stage_current(name, inputs, wd)) {
      std::fprintf(stderr, "[%s] up to date, skipping (use --force to rerun)\n",
                   name.c_str());
      continue;
    }

    const Clock::time_point t0 = Clock::now();
    std::vector<std::string> outputs;
    switch (stage) {
      case Stage::gen: run_gen(cfg, opt, wd, &outputs); break;
      case Stage::augment: run_augment(cfg, wd, &outputs); break;
      case Stage::train: run_train(cfg, wd, &outputs); break;
      case Stage::attack: run_attack(cfg, wd, &outputs); break;
      case Stage::eval: run_eval(cfg, opt, wd, &outputs); break;
    }
    manifest.record(name, inputs, outputs, wd, cfg.seed, ms_since(t0));
    manifest.save(manifest_path);
  }
}

}  // namespace mdl::cli
