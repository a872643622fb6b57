// SPDX-License-Identifier: Apache-2.0
#include "fmd/inference.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "fmd/util.hpp"

namespace fmd {

namespace {

using Json = nlohmann::ordered_json;

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

// Position just past "<keyword>\s*:" when keyword starts at `at` on a word
// boundary, otherwise npos.
std::size_t match_marker(std::string_view lower, std::size_t at, std::string_view keyword) {
  if (lower.compare(at, keyword.size(), keyword) != 0) return std::string_view::npos;
  if (at > 0 && is_alnum(lower[at - 1])) return std::string_view::npos;
  std::size_t i = at + keyword.size();
  while (i < lower.size() && is_space(lower[i])) ++i;
  if (i < lower.size() && lower[i] == ':') return i + 1;
  return std::string_view::npos;
}

struct Marker {
  std::size_t begin;
  std::size_t end;  // past the colon
};

std::vector<Marker> find_markers(std::string_view lower, std::string_view keyword,
                                 std::size_t from = 0) {
  std::vector<Marker> out;
  for (std::size_t at = lower.find(keyword, from); at != std::string_view::npos;
       at = lower.find(keyword, at + 1)) {
    std::size_t end = match_marker(lower, at, keyword);
    if (end != std::string_view::npos) out.push_back({at, end});
  }
  return out;
}

std::optional<ParsedPrediction> parse_clean(std::string_view raw, std::string_view lower) {
  for (const Marker& prediction : find_markers(lower, "prediction")) {
    auto explanations = find_markers(lower, "explanation", prediction.end);
    if (explanations.empty()) continue;
    const Marker& explanation = explanations.front();
    std::string_view segment =
        trim(raw.substr(prediction.end, explanation.begin - prediction.end));
    auto label = decode_label(segment);
    if (!label) continue;
    ParsedPrediction out;
    out.label = *label;
    out.explanation = std::string(trim(raw.substr(explanation.end)));
    out.status = ParseStatus::Clean;
    out.matched_token = std::string(segment);
    return out;
  }
  return std::nullopt;
}

std::optional<ParsedPrediction> parse_fallback(std::string_view raw, std::size_t window) {
  std::vector<std::string_view> tokens = split_whitespace(raw);
  if (tokens.size() > window) tokens.resize(window);

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    // Longest match first so "not enough info" wins over any single word.
    for (std::size_t width = std::min<std::size_t>(3, tokens.size() - i); width >= 1; --width) {
      const char* first = tokens[i].data();
      const char* last = tokens[i + width - 1].data() + tokens[i + width - 1].size();
      std::string_view span(first, static_cast<std::size_t>(last - first));
      auto label = decode_label(span);
      if (!label) continue;

      ParsedPrediction out;
      out.label = *label;
      out.status = ParseStatus::Fallback;
      out.matched_token = std::string(span);
      std::size_t start = static_cast<std::size_t>(first - raw.data());
      for (std::size_t k = start; k < raw.size(); ++k) {
        if (is_terminal(raw[k]) && (k + 1 == raw.size() || is_space(raw[k + 1]))) {
          out.explanation = std::string(trim(raw.substr(k + 1)));
          break;
        }
      }
      return out;
    }
  }
  return std::nullopt;
}

void count(ParseCounters& counters, ParseStatus status) {
  switch (status) {
    case ParseStatus::Clean: ++counters.clean; break;
    case ParseStatus::Fallback: ++counters.fallback; break;
    case ParseStatus::Failed: ++counters.failed; break;
  }
}

}  // namespace

std::string_view parse_status_name(ParseStatus status) {
  switch (status) {
    case ParseStatus::Clean: return "clean";
    case ParseStatus::Fallback: return "fallback";
    case ParseStatus::Failed: return "failed";
  }
  return "failed";
}

std::optional<ParseStatus> parse_parse_status(std::string_view text) {
  if (text == "clean") return ParseStatus::Clean;
  if (text == "fallback") return ParseStatus::Fallback;
  if (text == "failed") return ParseStatus::Failed;
  return std::nullopt;
}

ParsedPrediction parse_response(std::string_view raw, const ParseOptions& options) {
  const std::string lower = to_lower_ascii(raw);
  std::optional<ParsedPrediction> parsed = parse_clean(raw, lower);
  if (!parsed) parsed = parse_fallback(raw, options.fallback_window);
  if (!parsed) {
    parsed.emplace();
    parsed->label = options.fallback_label;
    parsed->status = ParseStatus::Failed;
  }
  parsed->raw_text = std::string(raw);
  return std::move(*parsed);
}

ParsedPrediction parse_response(std::string_view raw, ParseCounters& counters,
                                const ParseOptions& options) {
  ParsedPrediction parsed = parse_response(raw, options);
  count(counters, parsed.status);
  return parsed;
}

std::vector<GenerationResult> generate(const ModelArtifact& model,
                                       const std::vector<PromptInstance>& prompts,
                                       const GenerationConfig& config, TrainerBackend& backend) {
  config.validate();
  std::size_t limit = static_cast<std::size_t>(std::max(0, backend.capabilities().max_sequence_length));
  if (!model.manifest.stages.empty()) {
    limit = std::min(limit,
                     static_cast<std::size_t>(model.manifest.stages.back().config.max_sequence_length));
  }

  std::vector<GenerationResult> results;
  results.reserve(prompts.size());
  for (const PromptInstance& prompt : prompts) {
    GenerationResult result;
    result.record_id = prompt.record_id;
    std::size_t length = backend.count_tokens(prompt.input_text);
    if (length > limit) {
      result.error = "prompt has " + std::to_string(length) + " tokens, limit is " +
                     std::to_string(limit);
      results.push_back(std::move(result));
      continue;
    }
    std::string continuation;
    try {
      continuation = backend.generate(model.weights, prompt, config);
    } catch (const std::exception& e) {
      throw GenerationError(prompt.record_id, e.what());
    }
    for (const std::string& stop : config.stop_sequences) {
      if (stop.empty()) continue;
      if (auto at = continuation.find(stop); at != std::string::npos) continuation.resize(at);
    }
    result.text = prompt.response_prefix + continuation;
    results.push_back(std::move(result));
  }
  return results;
}

std::vector<ParsedPrediction> parse_generations(const std::vector<GenerationResult>& results,
                                                ParseCounters& counters,
                                                const ParseOptions& options) {
  std::vector<ParsedPrediction> out;
  out.reserve(results.size());
  for (const GenerationResult& result : results) {
    ParsedPrediction parsed = parse_response(result.text, counters, options);
    parsed.record_id = result.record_id;
    out.push_back(std::move(parsed));
  }
  return out;
}

std::string predictions_to_jsonl(const std::vector<ParsedPrediction>& predictions) {
  std::string out;
  for (const ParsedPrediction& p : predictions) {
    Json j;
    j["record_id"] = p.record_id;
    j["label"] = encode_label(p.label);
    j["explanation"] = p.explanation;
    j["parse_status"] = parse_status_name(p.status);
    j["raw_text"] = p.raw_text;
    out += j.dump(-1, ' ', false, Json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

std::vector<ParsedPrediction> parse_predictions_jsonl(std::string_view text) {
  std::vector<ParsedPrediction> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      Json j = Json::parse(line);
      ParsedPrediction p;
      p.record_id = j.at("record_id").get<std::string>();
      auto label = decode_label(j.at("label").get<std::string>());
      auto status = parse_parse_status(j.at("parse_status").get<std::string>());
      if (!label || !status) throw std::invalid_argument("bad label or parse_status");
      p.label = *label;
      p.status = *status;
      p.explanation = j.value("explanation", std::string());
      p.raw_text = j.value("raw_text", std::string());
      out.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw std::runtime_error("predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<ParsedPrediction> load_predictions(const std::filesystem::path& path) {
  return parse_predictions_jsonl(read_file(path));
}

}  // namespace fmd
