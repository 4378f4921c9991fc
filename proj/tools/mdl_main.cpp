// mdl: dataset generation, distance-target augmentation, training,
// adversarial evaluation. Stages read and write artifacts in a workdir;
// completed stages are skipped unless inputs changed or --force is given.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "mdl/common.hpp"
#include "mdl/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"manifold distance learner pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string stages_arg;
  std::string workdir_arg;
  std::string format = "bin";
  std::uint64_t seed_override = 0;
  bool has_seed = false;
  mdl::cli::PipelineOptions opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_flag("--force", opt.force, "rerun stages even if artifacts are current");
    sub->add_option("--workdir", workdir_arg, "override paths.workdir");
    sub->add_option("--seed", seed_override, "override dataset.seed")
        ->each([&](const std::string&) { has_seed = true; });
    sub->add_flag("--emit-ppm", opt.emit_ppm, "also write false-color pixmaps of grids");
    sub->add_option("--format", format, "dataset export format: bin|csv")
        ->check(CLI::IsMember({"bin", "csv"}));
  };

  CLI::App* cmd_gen = app.add_subcommand("gen", "generate the dataset");
  CLI::App* cmd_aug = app.add_subcommand("augment", "build train/test distance sets");
  CLI::App* cmd_train = app.add_subcommand("train", "train the configured models");
  CLI::App* cmd_attack = app.add_subcommand("attack", "run the robustness sweep");
  CLI::App* cmd_eval = app.add_subcommand("eval", "metrics and slice grids");
  CLI::App* cmd_run = app.add_subcommand("run", "run stages end to end");
  cmd_run->add_option("--stages", stages_arg, "comma-separated subset of stages");
  for (CLI::App* sub : {cmd_gen, cmd_aug, cmd_train, cmd_attack, cmd_eval, cmd_run}) {
    add_common(sub);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    mdl::cli::ExperimentConfig cfg = mdl::cli::parse_config(config_path);
    if (!workdir_arg.empty()) {
      cfg.workdir = workdir_arg;
      cfg.effective["paths.workdir"] = workdir_arg;
    }
    if (has_seed) {
      cfg.seed = seed_override;
      cfg.effective["dataset.seed"] = std::to_string(seed_override);
    }
    opt.emit_csv = format == "csv";

    std::vector<mdl::cli::Stage> stages;
    if (cmd_gen->parsed()) stages = {mdl::cli::Stage::gen};
    if (cmd_aug->parsed()) stages = {mdl::cli::Stage::augment};
    if (cmd_train->parsed()) stages = {mdl::cli::Stage::train};
    if (cmd_attack->parsed()) stages = {mdl::cli::Stage::attack};
    if (cmd_eval->parsed()) stages = {mdl::cli::Stage::eval};
    if (cmd_run->parsed()) {
      if (stages_arg.empty()) {
        stages = {mdl::cli::Stage::gen, mdl::cli::Stage::augment, mdl::cli::Stage::train,
                  mdl::cli::Stage::attack, mdl::cli::Stage::eval};
      } else {
        stages = mdl::cli::parse_stages(stages_arg);
      }
    }

    mdl::cli::run_pipeline(cfg, stages, opt);
    return 0;
  } catch (const mdl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return mdl::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
