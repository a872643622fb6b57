// SPDX-License-Identifier: Apache-2.0
#include "fmd/prompts.hpp"

#include <utility>

#include "fmd/util.hpp"

namespace fmd {

namespace detail {
extern const std::string_view kClassificationOnlyTemplate;
extern const std::string_view kJointTemplate;
}  // namespace detail

namespace {

constexpr std::string_view kResponseHeader = "### Response:\n";

using Slots = std::initializer_list<std::pair<std::string_view, std::string_view>>;

// Single pass: substituted text is never rescanned, so a claim containing
// "{justification}" stays literal.
std::string substitute(std::string_view text, Slots slots) {
  std::string out;
  out.reserve(text.size() + 256);
  std::size_t i = 0;
  while (i < text.size()) {
    bool replaced = false;
    if (text[i] == '{') {
      for (const auto& [name, value] : slots) {
        if (text.substr(i).starts_with(name)) {
          out += value;
          i += name.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(text[i++]);
  }
  return out;
}

}  // namespace

std::string_view prompt_kind_name(PromptKind kind) {
  return kind == PromptKind::Joint ? "joint" : "classification_only";
}

std::optional<PromptKind> parse_prompt_kind(std::string_view text) {
  std::string value = to_lower_ascii(trim(text));
  if (value == "joint") return PromptKind::Joint;
  if (value == "classification_only" || value == "classification") {
    return PromptKind::ClassificationOnly;
  }
  return std::nullopt;
}

std::string_view prompt_template(PromptKind kind) {
  return kind == PromptKind::Joint ? detail::kJointTemplate : detail::kClassificationOnlyTemplate;
}

std::string joint_target(Label label, std::string_view explanation) {
  std::string out = "Prediction: ";
  out += encode_label(label);
  out += " Explanation: ";
  out += explanation;
  return out;
}

PromptInstance render_prompt(const ClaimRecord& record, PromptKind kind, bool include_target) {
  if (trim(record.claim).empty()) {
    throw PromptError("record '" + record.id + "': claim is empty");
  }
  if (include_target && !record.label) {
    throw PromptError("record '" + record.id + "': field 'label' is required for a target");
  }
  if (include_target && kind == PromptKind::Joint && trim(record.explanation).empty()) {
    throw PromptError("record '" + record.id +
                      "': field 'explanation' is required for a joint target");
  }

  std::string_view tmpl = prompt_template(kind);
  std::size_t cut = tmpl.find(kResponseHeader);
  std::string_view input_part = tmpl.substr(0, cut + kResponseHeader.size());
  std::string_view target_part = tmpl.substr(cut + kResponseHeader.size());

  PromptInstance prompt;
  prompt.record_id = record.id;
  prompt.kind = kind;
  prompt.input_text = substitute(
      input_part, {{"{claim}", record.claim}, {"{justification}", record.justification}});

  if (include_target) {
    prompt.target_text = substitute(
        target_part, {{"{label}", encode_label(*record.label)}, {"{expl}", record.explanation}});
  } else if (kind == PromptKind::Joint) {
    prompt.response_prefix = std::string(kJointResponsePrefix);
    prompt.input_text += prompt.response_prefix;
  }
  return prompt;
}

}  // namespace fmd
