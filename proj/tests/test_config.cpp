#include <doctest.h>

#include <string>

#include "mdl/config.hpp"

using namespace mdl;
using namespace mdl::cli;

TEST_SUITE_BEGIN("config");

namespace {

const std::string kMinimal =
    "dataset.kind = concentric_spheres\n"
    "dataset.m = 1\n"
    "dataset.n = 2\n"
    "dataset.train_per_class = 100\n"
    "augment.max_norm = 0.05\n"
    "augment.n_on = 100\n"
    "augment.n_off = 100\n"
    "train.lr = 1e-5\n"
    "train.batch_size = 64\n"
    "train.epochs = 1000\n";

}  // namespace

TEST_CASE("the m50 n500 preset carries the published recipe") {
  const ExperimentConfig cfg = parse_config(std::string(MDL_PRESET_DIR) +
                                            "/concentric_m50_n500.cfg");
  CHECK(cfg.dataset_kind == "concentric_spheres");
  CHECK(cfg.m == 50);
  CHECK(cfg.n == 500);
  CHECK(cfg.augment.max_norm == 0.14);
  CHECK(cfg.train.lr_max == 1.5e-5);
  CHECK(cfg.train.batch_size == 4096);
  CHECK(cfg.train.epochs == 1000);
  CHECK(cfg.n_on == 500000);
  CHECK(cfg.n_off == 6000000);
  CHECK(cfg.robust_etas == std::vector<double>{5e-2, 8e-2});
  CHECK(cfg.tol == 0.14);
  // knee defaults for the 1000-epoch recipe
  CHECK(cfg.train.warmup_end == 10.0);
  CHECK(cfg.train.decay_start == 700.0);
  CHECK(cfg.train.decay_end == 1000.0);
}

TEST_CASE("every shipped preset parses") {
  for (const char* name :
       {"separated_m1_n2", "separated_m1_n50", "separated_m1_n500", "separated_m2_n500",
        "swissroll_m1_n2", "swissroll_m1_n50", "swissroll_m1_n500", "concentric_m1_n2",
        "concentric_m1_n50", "concentric_m2_n50", "concentric_m25_n500",
        "concentric_m50_n500", "concentric_m1_n2_desk", "concentric_m25_n100_desk",
        "swissroll_m1_n2_desk", "determinism_micro"}) {
    CAPTURE(name);
    CHECK_NOTHROW((void)parse_config(std::string(MDL_PRESET_DIR) + "/" + name + ".cfg"));
  }
}

TEST_CASE("an empty file reports the missing keys") {
  try {
    (void)parse_config_text("", "empty");
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("dataset.kind") != std::string::npos);
  }
}

TEST_CASE("duplicate keys name both lines") {
  const std::string text = kMinimal + "train.lr = 2e-5\n";
  try {
    (void)parse_config_text(text, "dup");
    FAIL("expected a config error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("duplicate key 'train.lr'") != std::string::npos);
    CHECK(msg.find("8") != std::string::npos);   // first definition
    CHECK(msg.find("11") != std::string::npos);  // duplicate
  }
}

TEST_CASE("unknown keys are rejected with their line") {
  const std::string text = kMinimal + "train.momentum = 0.9\n";
  try {
    (void)parse_config_text(text, "unknown");
    FAIL("expected a config error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("unknown key 'train.momentum'") != std::string::npos);
    CHECK(msg.find(":11") != std::string::npos);
  }
}

TEST_CASE("type and range violations are config errors") {
  CHECK_THROWS_AS(
      (void)parse_config_text(kMinimal + "attack.steps = soon\n", "t"), Error);
  CHECK_THROWS_AS(
      (void)parse_config_text(kMinimal + "eval.grid_res = 1\n", "t"), Error);
  // n <= m
  std::string bad = kMinimal;
  bad.replace(bad.find("dataset.n = 2"), 13, "dataset.n = 1");
  CHECK_THROWS_AS((void)parse_config_text(bad, "t"), Error);
  // rc requested without an eta
  CHECK_THROWS_AS(
      (void)parse_config_text(kMinimal + "train.models = dl,sc,rc\n", "t"), Error);
}

TEST_CASE("defaults are applied and echoed") {
  const ExperimentConfig cfg = parse_config_text(kMinimal, "mini");
  CHECK(cfg.augment.high_distance == 1.0);
  CHECK(cfg.attack_cfg.steps == 100);
  CHECK(cfg.attack_cfg.step_size == 5e-3);
  CHECK(cfg.train.adam_beta1 == 0.9);
  CHECK(cfg.width == 512);
  CHECK(!cfg.tol.has_value());
  bool saw_steps = false;
  for (const auto& line : cfg.applied_defaults) {
    if (line.find("attack.steps = 100") != std::string::npos) saw_steps = true;
  }
  CHECK(saw_steps);
}

TEST_CASE("comments and inline comments parse") {
  const std::string text = "# full line\n" + kMinimal + "eval.tol = 0.14 # inline\n";
  const ExperimentConfig cfg = parse_config_text(text, "c");
  CHECK(cfg.tol == 0.14);
}

TEST_CASE("per-kind epoch overrides rescale the knee") {
  const std::string text = kMinimal + "train.rc_epochs = 100\ntrain.robust_eta = 0.05\n";
  const ExperimentConfig cfg = parse_config_text(text, "k");
  const nn::TrainConfig dl = cfg.train_config_for(nn::ModelKind::distance_learner);
  CHECK(dl.epochs == 1000);
  const nn::TrainConfig rc = cfg.train_config_for(nn::ModelKind::robust);
  CHECK(rc.epochs == 100);
  CHECK(rc.warmup_end == doctest::Approx(1.0));
  CHECK(rc.decay_start == doctest::Approx(70.0));
  CHECK(rc.decay_end == 100.0);
  CHECK(rc.loss == nn::LossKind::cross_entropy);
}

TEST_CASE("stage fingerprints react to their sections only") {
  const ExperimentConfig a = parse_config_text(kMinimal, "a");
  std::string text = kMinimal;
  text.replace(text.find("train.lr = 1e-5"), 15, "train.lr = 2e-5");
  const ExperimentConfig b = parse_config_text(text, "b");
  CHECK(a.fingerprint({"dataset", "augment"}) == b.fingerprint({"dataset", "augment"}));
  CHECK(a.fingerprint({"train"}) != b.fingerprint({"train"}));
}

TEST_SUITE_END();
