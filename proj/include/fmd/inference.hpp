// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fmd/backend.hpp"
#include "fmd/orchestrator.hpp"
#include "fmd/prompts.hpp"

namespace fmd {

enum class ParseStatus { Clean, Fallback, Failed };

std::string_view parse_status_name(ParseStatus status);
std::optional<ParseStatus> parse_parse_status(std::string_view text);

struct ParsedPrediction {
  std::string record_id;
  Label label = Label::NEI;
  std::string explanation;
  ParseStatus status = ParseStatus::Failed;
  std::string raw_text;
  // Substring of raw_text that decoded to `label`; empty when failed.
  std::string matched_token;

  bool operator==(const ParsedPrediction&) const = default;
};

struct ParseOptions {
  Label fallback_label = Label::NEI;
  // How many leading whitespace tokens the fallback path inspects.
  std::size_t fallback_window = 10;
};

struct ParseCounters {
  std::size_t clean = 0;
  std::size_t fallback = 0;
  std::size_t failed = 0;

  std::size_t total() const { return clean + fallback + failed; }
};

// Total: never throws. Clean when "Prediction:" <label> "Explanation:" <rest>
// is found (case-insensitive, whitespace-tolerant). Otherwise the first
// decodable label among the leading tokens gives a fallback parse whose
// explanation is the text after the next sentence boundary. Otherwise the
// parse fails with the fallback label.
ParsedPrediction parse_response(std::string_view raw, const ParseOptions& options = {});
ParsedPrediction parse_response(std::string_view raw, ParseCounters& counters,
                                const ParseOptions& options = {});

struct GenerationResult {
  std::string record_id;
  // Full response section: prompt.response_prefix followed by the backend's
  // continuation.
  std::string text;
  std::optional<std::string> error;
};

class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& record_id, const std::string& what)
      : std::runtime_error("generation failed for record '" + record_id + "': " + what),
        record_id_(record_id) {}

  const std::string& record_id() const { return record_id_; }

 private:
  std::string record_id_;
};

// One result per prompt, in order. A prompt longer than the backend's (or the
// model's) max sequence length yields a per-record error and the run
// continues; a backend exception aborts with GenerationError.
std::vector<GenerationResult> generate(const ModelArtifact& model,
                                       const std::vector<PromptInstance>& prompts,
                                       const GenerationConfig& config, TrainerBackend& backend);

std::vector<ParsedPrediction> parse_generations(const std::vector<GenerationResult>& results,
                                                ParseCounters& counters,
                                                const ParseOptions& options = {});

std::string predictions_to_jsonl(const std::vector<ParsedPrediction>& predictions);
std::vector<ParsedPrediction> parse_predictions_jsonl(std::string_view text);
std::vector<ParsedPrediction> load_predictions(const std::filesystem::path& path);

}  // namespace fmd
