// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fmd/backend.hpp"

namespace fmd {

// Memorizes record_id -> target_text; later stages overwrite earlier ones.
// Generation replays the memorized target, or nothing for unseen records.
class EchoBackend : public TrainerBackend {
 public:
  std::string name() const override { return "echo"; }
  BackendCapabilities capabilities() const override;
  Weights base_weights() override;
  Weights train(std::span<const PromptInstance> examples, const StageConfig& config,
                const Weights& init, std::uint64_t seed) override;
  std::string generate(const Weights& weights, const PromptInstance& prompt,
                       const GenerationConfig& config) override;
};

// Tiny trainable model. Labels come from a multinomial naive Bayes over the
// claim/justification words; explanations are retrieved from the training
// example whose words overlap most with the prompt. Each epoch adds one pass
// of counts, so stages accumulate on top of their initial weights.
class BagOfWordsBackend : public TrainerBackend {
 public:
  std::string name() const override { return "bow"; }
  BackendCapabilities capabilities() const override;
  Weights base_weights() override;
  Weights train(std::span<const PromptInstance> examples, const StageConfig& config,
                const Weights& init, std::uint64_t seed) override;
  std::string generate(const Weights& weights, const PromptInstance& prompt,
                       const GenerationConfig& config) override;
  std::map<std::string, std::string> training_defaults() const override;
};

// Talks JSON over HTTP to an external trainer (for instance a Python LoRA
// fine-tuning service):
//   GET  <url>/capabilities -> {"name", "max_sequence_length", "precisions"}
//   POST <url>/train        -> {"weights": {"handle", "blob"}}
//   POST <url>/generate     -> {"text"}
// Requests carry "Authorization: Bearer <token>" when a token is set.
class RemoteBackend : public TrainerBackend {
 public:
  RemoteBackend(std::string url, std::string token = {});

  std::string name() const override;
  BackendCapabilities capabilities() const override;
  Weights base_weights() override;
  Weights train(std::span<const PromptInstance> examples, const StageConfig& config,
                const Weights& init, std::uint64_t seed) override;
  std::string generate(const Weights& weights, const PromptInstance& prompt,
                       const GenerationConfig& config) override;
  std::map<std::string, std::string> training_defaults() const override;

 private:
  std::string post(const std::string& path, const std::string& body) const;
  std::string get(const std::string& path) const;

  std::string url_;
  std::string token_;
};

inline constexpr std::string_view kBackendUrlEnv = "FMD_BACKEND_URL";
inline constexpr std::string_view kBackendTokenEnv = "FMD_BACKEND_TOKEN";

std::vector<std::string> backend_names();

// "echo" (alias "mock"), "bow", or "remote" (endpoint from FMD_BACKEND_URL,
// token from FMD_BACKEND_TOKEN). Returns nullptr for unknown names.
std::unique_ptr<TrainerBackend> make_backend(std::string_view name);

}  // namespace fmd
