// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmd/backend.hpp"
#include "fmd/util.hpp"

namespace fmd::testing {

// Records every train call. Output weights are a digest of (init, targets,
// config, seed) so the chain is checkable.
class RecordingBackend : public TrainerBackend {
 public:
  struct Call {
    std::vector<PromptInstance> examples;
    StageConfig config;
    Weights init;
    std::uint64_t seed = 0;
    Weights output;
  };

  std::vector<Call> calls;
  std::optional<std::size_t> fail_on_call;
  BackendCapabilities caps{1024, {WeightPrecision::FourBit, WeightPrecision::Full}};

  std::string name() const override { return "recording"; }
  BackendCapabilities capabilities() const override { return caps; }
  Weights base_weights() override { return {"recording:base", "base"}; }

  Weights train(std::span<const PromptInstance> examples, const StageConfig& config,
                const Weights& init, std::uint64_t seed) override {
    if (fail_on_call && *fail_on_call == calls.size()) {
      throw std::runtime_error("simulated out-of-memory");
    }
    std::string blob = init.blob + "|" + std::string(prompt_kind_name(config.prompt_kind)) + "x" +
                       std::to_string(config.epochs) + "/" + std::to_string(seed);
    for (const auto& e : examples) blob += "/" + e.target_text;
    Weights out{weights_handle_for(blob), blob};
    calls.push_back({{examples.begin(), examples.end()}, config, init, seed, out});
    return out;
  }

  std::string generate(const Weights&, const PromptInstance&, const GenerationConfig&) override {
    return {};
  }

  std::map<std::string, std::string> training_defaults() const override {
    return {{"optimizer", "adamw_8bit"}, {"scheduler", "linear"}};
  }
};

}  // namespace fmd::testing
