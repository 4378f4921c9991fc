#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdl/config.hpp"

namespace mdl::cli {

enum class Stage { gen, augment, train, attack, eval };

std::vector<Stage> parse_stages(const std::string& csv);
std::string to_string(Stage s);

struct PipelineOptions {
  bool force = false;
  bool emit_csv = false;
  bool emit_ppm = false;
};

// Artifact names inside a workdir.
namespace artifacts {
inline constexpr const char* dataset = "dataset.bin";
inline constexpr const char* dataset_csv = "dataset.csv";
inline constexpr const char* trainset = "trainset.bin";
inline constexpr const char* testset = "testset.bin";
inline constexpr const char* robustness = "robustness.csv";
inline constexpr const char* metrics = "metrics.csv";
inline constexpr const char* manifest = "manifest.json";
std::string checkpoint(nn::ModelKind kind, std::size_t robust_index);
}  // namespace artifacts

/// Runs the requested stages in canonical order against cfg.workdir.
/// Completed stages with unchanged inputs are skipped unless forced; every
/// emitted file lands in the manifest with a content hash. The workdir is
/// held under an advisory lock for the duration.
void run_pipeline(const ExperimentConfig& cfg, const std::vector<Stage>& stages,
                  const PipelineOptions& opt);

// Split of a generated dataset into the train/test pools the stages use:
// within each class block, the first train_per_class points are train.
std::vector<std::size_t> train_pool(const ExperimentConfig& cfg);
std::vector<std::size_t> test_pool(const ExperimentConfig& cfg);

}  // namespace mdl::cli
