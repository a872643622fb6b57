// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace fmd {

// Integer codes follow the dataset's class table: False=0, True=1, NEI=2.
enum class Label : std::uint8_t { False = 0, True = 1, NEI = 2 };

inline constexpr std::size_t kNumLabels = 3;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {Label::False, Label::True, Label::NEI};

constexpr std::size_t label_index(Label label) { return static_cast<std::size_t>(label); }

std::optional<Label> label_from_code(int code);

// Human-facing class name used in reports ("False", "True", "NEI").
std::string_view label_display_name(Label label);

// Canonical surface token: "true", "not_enough_info" or "false".
std::string_view encode_label(Label label);

// Case-insensitive; strips surrounding whitespace and punctuation. Accepts the
// canonical tokens, the aliases "nei", "not enough info",
// "not_enough_information", and the option-menu digits 1 (True), 2 (NEI),
// 3 (False). Returns std::nullopt for anything else.
std::optional<Label> decode_label(std::string_view token);

// Every token decode_label accepts, for error messages.
std::string accepted_label_tokens();

}  // namespace fmd
