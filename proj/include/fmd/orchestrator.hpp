// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fmd/backend.hpp"
#include "fmd/dataset.hpp"

namespace fmd {

struct SchedulePlan {
  std::string name;
  std::vector<StageConfig> stages;

  int total_epochs() const;
  void validate() const;

  bool operator==(const SchedulePlan&) const = default;
};

class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> schedule_presets();

// "seqwen":  classification_only x3, then joint x5
// "joint5":  joint x5
// "joint8":  joint x8
// "cls3":    classification_only x3
// Augmented records feed classification_only stages only.
SchedulePlan plan_schedule(std::string_view name);

// Plain-text plan file. Top-level keys `name` and `preset`; each
// `[stage N]` section (1-based) overrides stage N of the preset or, past its
// end, appends a new stage. Keys: prompt_kind, epochs, learning_rate,
// max_sequence_length, total_batch_size, adapter_rank, adapter_alpha,
// weight_precision, include_augmented. '#' starts a comment.
SchedulePlan parse_schedule_config(std::string_view text);
SchedulePlan load_schedule_config(const std::filesystem::path& path);

struct StageRecord {
  StageConfig config;
  std::size_t num_examples = 0;
  std::string init_weights;
  std::string output_weights;
  std::string completed_at;

  bool operator==(const StageRecord&) const = default;
};

struct RunManifest {
  std::string schedule_name;
  std::string backend;
  std::map<std::string, std::string> backend_defaults;
  std::string dataset_checksum;
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;
  std::string weights_checksum;

  int total_epochs() const;

  bool operator==(const RunManifest&) const = default;
};

std::string manifest_to_json(const RunManifest& manifest, bool include_timestamps = true);
RunManifest manifest_from_json(std::string_view text);

struct ModelArtifact {
  Weights weights;
  RunManifest manifest;
};

class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes <dir>/manifest.json and <dir>/weights.bin.
void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& dir);
// Verifies the weights digest recorded in the manifest.
ModelArtifact load_artifact(const std::filesystem::path& dir);

class ScheduleError : public std::runtime_error {
 public:
  ScheduleError(const std::string& what, std::size_t failed_stage,
                std::optional<ModelArtifact> last_checkpoint)
      : std::runtime_error(what),
        failed_stage_(failed_stage),
        last_checkpoint_(std::move(last_checkpoint)) {}

  std::size_t failed_stage() const { return failed_stage_; }
  const std::optional<ModelArtifact>& last_checkpoint() const { return last_checkpoint_; }

 private:
  std::size_t failed_stage_;
  std::optional<ModelArtifact> last_checkpoint_;
};

struct RunOptions {
  // When set, stage i's artifact is saved to <dir>/stage_<i+1> as soon as the
  // stage finishes.
  std::optional<std::filesystem::path> checkpoint_dir;
};

// Checks every precondition of run_schedule without training. Throws
// PlanError.
void preflight_schedule(const SchedulePlan& plan, const std::vector<ClaimRecord>& train_records,
                        const TrainerBackend& backend);

ModelArtifact run_schedule(const SchedulePlan& plan, const std::vector<ClaimRecord>& train_records,
                           TrainerBackend& backend, std::uint64_t seed,
                           const RunOptions& options = {});

// Checksum of the records as canonical json-lines.
std::string dataset_checksum(const std::vector<ClaimRecord>& records);

}  // namespace fmd
