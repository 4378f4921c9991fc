#pragma once

#include <optional>
#include <string>

#include "mdl/dataset.hpp"
#include "mdl/manifold.hpp"
#include "mdl/nn.hpp"

namespace mdl::serialize {

// Dataset container ("MDLD", little-endian): version, m/n/C/N, row-major
// f64 points, u8 labels, length-prefixed JSON metadata, then an optional
// N x C f64 target block when the metadata says targets_present.
void write_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset read_dataset(const std::string& path);

void write_training_set(const manifold::TrainingSet& ts, const LabeledDataset& origin,
                        const std::string& path);
manifold::TrainingSet read_training_set(const std::string& path);

void write_dataset_csv(const LabeledDataset& ds, const std::string& path);

// Checkpoint ("MDLM"): version, model kind, n, C, layer table, f64
// parameter blocks in declaration order (batch-norm running stats
// interleaved per layer), length-prefixed JSON metadata.
struct CheckpointMeta {
  std::string json;  // train config echo, seed, final losses
};

void write_checkpoint(const nn::Model& model, nn::ModelKind kind,
                      const std::string& meta_json, const std::string& path);

struct Checkpoint {
  nn::Model model;
  nn::ModelKind kind = nn::ModelKind::distance_learner;
  std::string meta_json;
};

Checkpoint read_checkpoint(const std::string& path);

std::uint64_t file_hash(const std::string& path);  // FNV-1a, for the manifest

}  // namespace mdl::serialize
