// SPDX-License-Identifier: Apache-2.0
#include "fmd/label.hpp"

#include <cctype>
#include <utility>

#include "fmd/util.hpp"

namespace fmd {

namespace {

struct Alias {
  std::string_view token;
  Label label;
};

// Canonical tokens first, then aliases, then the option-menu digits.
constexpr Alias kAliases[] = {
    {"true", Label::True},
    {"not_enough_info", Label::NEI},
    {"false", Label::False},
    {"nei", Label::NEI},
    {"not enough info", Label::NEI},
    {"not_enough_information", Label::NEI},
    {"1", Label::True},
    {"2", Label::NEI},
    {"3", Label::False},
};

bool strippable(char c) {
  auto u = static_cast<unsigned char>(c);
  // '_' is part of "not_enough_info" and must survive.
  return std::isspace(u) || (std::ispunct(u) && c != '_');
}

}  // namespace

std::optional<Label> label_from_code(int code) {
  switch (code) {
    case 0: return Label::False;
    case 1: return Label::True;
    case 2: return Label::NEI;
    default: return std::nullopt;
  }
}

std::string_view label_display_name(Label label) {
  switch (label) {
    case Label::False: return "False";
    case Label::True: return "True";
    case Label::NEI: return "NEI";
  }
  return "?";
}

std::string_view encode_label(Label label) {
  switch (label) {
    case Label::False: return "false";
    case Label::True: return "true";
    case Label::NEI: return "not_enough_info";
  }
  return "?";
}

std::optional<Label> decode_label(std::string_view token) {
  while (!token.empty() && strippable(token.front())) token.remove_prefix(1);
  while (!token.empty() && strippable(token.back())) token.remove_suffix(1);
  if (token.empty()) return std::nullopt;

  // Collapse inner whitespace runs so "not  enough\tinfo" matches.
  std::string normalized;
  for (std::string_view part : split_whitespace(token)) {
    if (!normalized.empty()) normalized.push_back(' ');
    normalized += to_lower_ascii(part);
  }
  for (const Alias& alias : kAliases) {
    if (normalized == alias.token) return alias.label;
  }
  return std::nullopt;
}

std::string accepted_label_tokens() {
  std::string out;
  for (const Alias& alias : kAliases) {
    if (!out.empty()) out += ", ";
    out += '"';
    out += alias.token;
    out += '"';
  }
  return out;
}

}  // namespace fmd
