#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "mdl/pipeline.hpp"
#include "mdl/serialize.hpp"

using namespace mdl;
using namespace mdl::cli;

TEST_SUITE_BEGIN("pipeline");

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("mdl_pipe_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// tiny but complete experiment; a couple of seconds of training
ExperimentConfig micro_config(const std::string& workdir) {
  ExperimentConfig cfg = parse_config_text(
      "dataset.kind = concentric_spheres\n"
      "dataset.m = 1\n"
      "dataset.n = 2\n"
      "dataset.train_per_class = 400\n"
      "dataset.test_per_class = 200\n"
      "augment.max_norm = 0.038\n"
      "augment.n_on = 600\n"
      "augment.n_off = 1000\n"
      "augment.test_on = 200\n"
      "augment.test_off = 200\n"
      "train.models = dl,sc\n"
      "train.width = 16\n"
      "train.lr = 1e-3\n"
      "train.batch_size = 128\n"
      "train.epochs = 4\n"
      "train.warmup_end = 1\n"
      "train.decay_start = 3\n"
      "attack.epsilons = 0.0,0.02\n"
      "attack.steps = 5\n"
      "attack.test_count = 40\n"
      "eval.tol = 0.038\n"
      "eval.grid_res = 8\n",
      "micro");
  cfg.workdir = workdir;
  return cfg;
}

const std::vector<Stage> kAll = {Stage::gen, Stage::augment, Stage::train, Stage::attack,
                                 Stage::eval};

}  // namespace

TEST_CASE("full micro pipeline emits every artifact and a complete manifest") {
  TempDir tmp("full");
  const ExperimentConfig cfg = micro_config(tmp.path.string());
  run_pipeline(cfg, kAll, {});

  for (const char* f : {"dataset.bin", "trainset.bin", "testset.bin", "dl.ckpt",
                        "sc.ckpt", "robustness.csv", "metrics.csv", "grid_dl.csv",
                        "grid_sc.csv", "manifest.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(tmp.path / f));
  }

  // manifest lists each emitted file with its current content hash
  std::ifstream mf(tmp.path / "manifest.json");
  std::string manifest((std::istreambuf_iterator<char>(mf)),
                       std::istreambuf_iterator<char>());
  for (const char* f : {"dataset.bin", "trainset.bin", "dl.ckpt", "robustness.csv"}) {
    CHECK(manifest.find(f) != std::string::npos);
  }
}

TEST_CASE("a second run without --force is a no-op") {
  TempDir tmp("noop");
  const ExperimentConfig cfg = micro_config(tmp.path.string());
  run_pipeline(cfg, {Stage::gen}, {});
  const auto first_write = fs::last_write_time(tmp.path / "dataset.bin");
  run_pipeline(cfg, {Stage::gen}, {});
  CHECK(fs::last_write_time(tmp.path / "dataset.bin") == first_write);

  PipelineOptions force;
  force.force = true;
  run_pipeline(cfg, {Stage::gen}, force);
  CHECK(fs::last_write_time(tmp.path / "dataset.bin") != first_write);
}

TEST_CASE("changed upstream inputs invalidate downstream stages") {
  TempDir tmp("dirty");
  ExperimentConfig cfg = micro_config(tmp.path.string());
  run_pipeline(cfg, {Stage::gen, Stage::augment}, {});
  const auto first_write = fs::last_write_time(tmp.path / "trainset.bin");

  cfg.seed = 12345;
  cfg.effective["dataset.seed"] = "12345";
  run_pipeline(cfg, {Stage::gen, Stage::augment}, {});
  CHECK(fs::last_write_time(tmp.path / "trainset.bin") != first_write);
}

TEST_CASE("attack without checkpoints is a dependency error") {
  TempDir tmp("dep");
  const ExperimentConfig cfg = micro_config(tmp.path.string());
  run_pipeline(cfg, {Stage::gen}, {});
  try {
    run_pipeline(cfg, {Stage::attack}, {});
    FAIL("expected a dependency error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::dependency);
    CHECK(std::string(e.what()).find("dl.ckpt") != std::string::npos);
  }
}

TEST_CASE("deleting downstream artifacts leaves upstream ones valid") {
  TempDir tmp("isolate");
  const ExperimentConfig cfg = micro_config(tmp.path.string());
  run_pipeline(cfg, kAll, {});
  fs::remove(tmp.path / "robustness.csv");
  fs::remove(tmp.path / "metrics.csv");
  // upstream artifacts still load
  CHECK_NOTHROW((void)serialize::read_dataset((tmp.path / "dataset.bin").string()));
  CHECK_NOTHROW((void)serialize::read_checkpoint((tmp.path / "dl.ckpt").string()));
  // and the missing stages rerun cleanly
  run_pipeline(cfg, {Stage::attack, Stage::eval}, {});
  CHECK(fs::exists(tmp.path / "robustness.csv"));
}

TEST_CASE("cli exit codes: 0 ok, 2 config, 3 dependency") {
  TempDir tmp("cli");
  const std::string cli = MDL_CLI_PATH;
  const std::string cfg = (tmp.path / "micro.cfg").string();
  {
    std::ofstream f(cfg);
    f << "dataset.kind = concentric_spheres\ndataset.m = 1\ndataset.n = 2\n"
         "dataset.train_per_class = 50\naugment.max_norm = 0.05\n"
         "augment.n_on = 50\naugment.n_off = 50\ntrain.lr = 1e-4\n"
         "train.batch_size = 32\ntrain.epochs = 2\ntrain.warmup_end = 1\n"
         "train.decay_start = 1\nattack.epsilons = 0.01\n";
  }
  auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  const std::string wd = " --workdir " + (tmp.path / "wd").string();
  CHECK(run("gen --config " + cfg + wd) == 0);
  CHECK(run("gen --config " + (tmp.path / "missing.cfg").string() + wd) == 2);
  CHECK(run("attack --config " + cfg + wd) == 3);  // no checkpoints yet
}

TEST_CASE("two runs of the same config are byte-identical") {
  TempDir a("det_a"), b("det_b");
  ExperimentConfig ca = micro_config(a.path.string());
  ExperimentConfig cb = micro_config(b.path.string());
  run_pipeline(ca, {Stage::gen, Stage::augment, Stage::train}, {});
  run_pipeline(cb, {Stage::gen, Stage::augment, Stage::train}, {});
  for (const char* f : {"dataset.bin", "trainset.bin", "testset.bin", "dl.ckpt", "sc.ckpt"}) {
    CAPTURE(f);
    CHECK(serialize::file_hash((a.path / f).string()) ==
          serialize::file_hash((b.path / f).string()));
  }
}

TEST_SUITE_END();
