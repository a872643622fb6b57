// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fmd/prompts.hpp"

namespace fmd {

enum class WeightPrecision { FourBit, Full };

std::string_view precision_name(WeightPrecision precision);  // "four_bit" / "full"
std::optional<WeightPrecision> parse_precision(std::string_view text);

// Hyperparameters of one fine-tuning stage. Defaults are the values used for
// every stage of the published runs.
struct StageConfig {
  PromptKind prompt_kind = PromptKind::ClassificationOnly;
  int epochs = 1;
  double learning_rate = 2e-4;
  int max_sequence_length = 1024;
  int total_batch_size = 16;
  int adapter_rank = 16;
  int adapter_alpha = 16;
  WeightPrecision weight_precision = WeightPrecision::FourBit;
  // Whether records flagged is_augmented are fed to this stage.
  bool include_augmented = true;

  // Throws std::invalid_argument on epochs < 1, learning_rate <= 0,
  // adapter_rank <= 0 and other non-positive sizes.
  void validate() const;

  bool operator==(const StageConfig&) const = default;
};

StageConfig make_stage(PromptKind kind, int epochs);

// Opaque model weights. `handle` identifies the weights (content digest for
// trained weights); `blob` is whatever the backend needs to restore them.
struct Weights {
  std::string handle;
  std::string blob;

  bool operator==(const Weights&) const = default;
};

std::string weights_handle_for(std::string_view blob);

struct BackendCapabilities {
  int max_sequence_length = 0;
  std::vector<WeightPrecision> precisions;

  bool supports(WeightPrecision precision) const;
};

enum class Decoding { Greedy };

struct GenerationConfig {
  int max_new_tokens = 512;
  Decoding decoding = Decoding::Greedy;
  std::vector<std::string> stop_sequences;

  void validate() const;  // max_new_tokens >= 1
};

// A trainer backend performs the parameter updates and the generation. Calls
// are synchronous; train must be deterministic in (examples, config, init,
// seed) and generate must be deterministic under greedy decoding.
class TrainerBackend {
 public:
  virtual ~TrainerBackend() = default;

  virtual std::string name() const = 0;
  virtual BackendCapabilities capabilities() const = 0;
  virtual Weights base_weights() = 0;

  // Starts from `init` with a fresh optimizer and returns the new weights.
  virtual Weights train(std::span<const PromptInstance> examples, const StageConfig& config,
                        const Weights& init, std::uint64_t seed) = 0;

  // Returns the continuation of prompt.input_text (without the prompt and
  // without prompt.response_prefix).
  virtual std::string generate(const Weights& weights, const PromptInstance& prompt,
                               const GenerationConfig& config) = 0;

  // Length measure checked against max_sequence_length. Whitespace tokens
  // unless the backend knows better.
  virtual std::size_t count_tokens(std::string_view text) const;

  // Optimizer, scheduler and similar settings the backend applies on its own.
  // Recorded in the run manifest.
  virtual std::map<std::string, std::string> training_defaults() const { return {}; }
};

}  // namespace fmd
