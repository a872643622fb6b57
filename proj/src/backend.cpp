// SPDX-License-Identifier: Apache-2.0
#include "fmd/backend.hpp"

#include <algorithm>
#include <stdexcept>

#include "fmd/util.hpp"

namespace fmd {

std::string_view precision_name(WeightPrecision precision) {
  return precision == WeightPrecision::Full ? "full" : "four_bit";
}

std::optional<WeightPrecision> parse_precision(std::string_view text) {
  std::string value = to_lower_ascii(trim(text));
  if (value == "four_bit" || value == "4bit" || value == "4-bit") return WeightPrecision::FourBit;
  if (value == "full") return WeightPrecision::Full;
  return std::nullopt;
}

void StageConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("stage epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("stage learning_rate must be > 0");
  if (adapter_rank <= 0) throw std::invalid_argument("stage adapter_rank must be > 0");
  if (adapter_alpha <= 0) throw std::invalid_argument("stage adapter_alpha must be > 0");
  if (max_sequence_length <= 0) {
    throw std::invalid_argument("stage max_sequence_length must be > 0");
  }
  if (total_batch_size <= 0) throw std::invalid_argument("stage total_batch_size must be > 0");
}

StageConfig make_stage(PromptKind kind, int epochs) {
  StageConfig stage;
  stage.prompt_kind = kind;
  stage.epochs = epochs;
  stage.include_augmented = kind == PromptKind::ClassificationOnly;
  return stage;
}

std::string weights_handle_for(std::string_view blob) { return "sha256:" + sha256_hex(blob); }

bool BackendCapabilities::supports(WeightPrecision precision) const {
  return std::find(precisions.begin(), precisions.end(), precision) != precisions.end();
}

void GenerationConfig::validate() const {
  if (max_new_tokens < 1) throw std::invalid_argument("max_new_tokens must be >= 1");
}

std::size_t TrainerBackend::count_tokens(std::string_view text) const {
  return split_whitespace(text).size();
}

}  // namespace fmd
