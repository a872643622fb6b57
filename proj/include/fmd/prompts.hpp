// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "fmd/dataset.hpp"

namespace fmd {

enum class PromptKind { ClassificationOnly, Joint };

std::string_view prompt_kind_name(PromptKind kind);  // "classification_only" / "joint"
std::optional<PromptKind> parse_prompt_kind(std::string_view text);

struct PromptInstance {
  std::string record_id;
  PromptKind kind = PromptKind::ClassificationOnly;
  // Everything up to and including "### Response:\n". Inference prompts of
  // the joint kind also carry the response prefix ("Prediction:").
  std::string input_text;
  std::string target_text;
  // Text already placed after "### Response:\n" in input_text.
  std::string response_prefix;

  bool operator==(const PromptInstance&) const = default;
};

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw template fixture with {claim}, {justification}, {label} and {expl}
// placeholders.
std::string_view prompt_template(PromptKind kind);

inline constexpr std::string_view kJointResponsePrefix = "Prediction:";

// "Prediction: <token> Explanation: <explanation>".
std::string joint_target(Label label, std::string_view explanation);

PromptInstance render_prompt(const ClaimRecord& record, PromptKind kind, bool include_target);

}  // namespace fmd
