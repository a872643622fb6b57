// SPDX-License-Identifier: Apache-2.0
#include "fmd/backends.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>
#include <stdexcept>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fmd/inference.hpp"
#include "fmd/metrics.hpp"
#include "fmd/util.hpp"

namespace fmd {

namespace {

using Json = nlohmann::json;

std::string strip_prefix(const std::string& text, std::string_view prefix) {
  if (!prefix.empty() && std::string_view(text).starts_with(prefix)) {
    return text.substr(prefix.size());
  }
  return text;
}

std::string cap_tokens(const std::string& text, int max_new_tokens) {
  auto tokens = split_whitespace(text);
  if (tokens.size() <= static_cast<std::size_t>(max_new_tokens)) return text;
  const auto& last = tokens[static_cast<std::size_t>(max_new_tokens) - 1];
  return text.substr(0, static_cast<std::size_t>(last.data() + last.size() - text.data()));
}

Weights make_weights(std::string blob) {
  Weights w;
  w.handle = weights_handle_for(blob);
  w.blob = std::move(blob);
  return w;
}

// Claim and justification words of a rendered prompt; the fixed template
// text is dropped.
std::vector<std::string> prompt_features(std::string_view input_text) {
  constexpr std::string_view kClaim = "### Claim:\n";
  constexpr std::string_view kJustification = "### Justification:";
  constexpr std::string_view kResponse = "### Response:";
  std::size_t begin = input_text.find(kClaim);
  begin = begin == std::string_view::npos ? 0 : begin + kClaim.size();
  std::size_t end = input_text.rfind(kResponse);
  if (end == std::string_view::npos || end < begin) end = input_text.size();
  std::string body(input_text.substr(begin, end - begin));
  if (auto at = body.find(kJustification); at != std::string::npos) {
    body.replace(at, kJustification.size(), " ");
  }
  return tokenize_for_rouge(body);
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

Json stage_json(const StageConfig& c) {
  return Json{{"prompt_kind", prompt_kind_name(c.prompt_kind)},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"max_sequence_length", c.max_sequence_length},
              {"total_batch_size", c.total_batch_size},
              {"adapter_rank", c.adapter_rank},
              {"adapter_alpha", c.adapter_alpha},
              {"weight_precision", precision_name(c.weight_precision)}};
}

Json prompt_json(const PromptInstance& p) {
  return Json{{"record_id", p.record_id},
              {"kind", prompt_kind_name(p.kind)},
              {"input_text", p.input_text},
              {"target_text", p.target_text},
              {"response_prefix", p.response_prefix}};
}

}  // namespace

// ---------------------------------------------------------------------------
// EchoBackend

BackendCapabilities EchoBackend::capabilities() const {
  return {std::numeric_limits<int>::max(), {WeightPrecision::FourBit, WeightPrecision::Full}};
}

Weights EchoBackend::base_weights() { return {"echo:base", "{}"}; }

Weights EchoBackend::train(std::span<const PromptInstance> examples, const StageConfig&,
                           const Weights& init, std::uint64_t) {
  Json memory = Json::parse(init.blob.empty() ? "{}" : init.blob);
  for (const PromptInstance& example : examples) memory[example.record_id] = example.target_text;
  return make_weights(memory.dump(-1, ' ', false, Json::error_handler_t::replace));
}

std::string EchoBackend::generate(const Weights& weights, const PromptInstance& prompt,
                                  const GenerationConfig& config) {
  Json memory = Json::parse(weights.blob.empty() ? "{}" : weights.blob);
  auto it = memory.find(prompt.record_id);
  if (it == memory.end()) return {};
  return cap_tokens(strip_prefix(it->get<std::string>(), prompt.response_prefix),
                    config.max_new_tokens);
}

// ---------------------------------------------------------------------------
// BagOfWordsBackend

namespace {

struct BowModel {
  std::array<double, kNumLabels> documents{};
  std::array<std::map<std::string, double>, kNumLabels> words;
  std::array<double, kNumLabels> word_totals{};
  // record_id -> (feature text, label, explanation)
  std::map<std::string, std::tuple<std::string, Label, std::string>> memory;

  static BowModel from_blob(const std::string& blob) {
    BowModel m;
    if (blob.empty()) return m;
    Json j = Json::parse(blob);
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      m.documents[c] = j.at("documents").at(c).get<double>();
      m.words[c] = j.at("words").at(c).get<std::map<std::string, double>>();
      m.word_totals[c] = j.at("word_totals").at(c).get<double>();
    }
    for (const auto& [id, entry] : j.at("memory").items()) {
      auto label = label_from_code(entry.at("label").get<int>());
      m.memory[id] = {entry.at("features").get<std::string>(), label.value_or(Label::NEI),
                      entry.at("explanation").get<std::string>()};
    }
    return m;
  }

  std::string to_blob() const {
    Json j;
    j["documents"] = documents;
    j["words"] = words;
    j["word_totals"] = word_totals;
    j["memory"] = Json::object();
    for (const auto& [id, entry] : memory) {
      const auto& [features, label, explanation] = entry;
      j["memory"][id] = {{"features", features},
                         {"label", static_cast<int>(label_index(label))},
                         {"explanation", explanation}};
    }
    return j.dump(-1, ' ', false, Json::error_handler_t::replace);
  }

  Label classify(const std::vector<std::string>& features) const {
    std::set<std::string_view> vocabulary;
    for (const auto& table : words) {
      for (const auto& [w, n] : table) vocabulary.insert(w);
    }
    const double v = static_cast<double>(std::max<std::size_t>(vocabulary.size(), 1));
    const double docs = documents[0] + documents[1] + documents[2];

    Label best = Label::False;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Label c : kAllLabels) {
      std::size_t k = label_index(c);
      double score = std::log((documents[k] + 1.0) / (docs + kNumLabels));
      for (const auto& w : features) {
        auto it = words[k].find(w);
        double n = it == words[k].end() ? 0.0 : it->second;
        score += std::log((n + 1.0) / (word_totals[k] + v));
      }
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    return best;
  }

  std::string retrieve(const std::vector<std::string>& features, Label label) const {
    const std::string* best = nullptr;
    double best_score = -1.0;
    bool best_same_label = false;
    for (const auto& [id, entry] : memory) {
      const auto& [text, entry_label, explanation] = entry;
      std::vector<std::string> other;
      for (std::string_view t : split_whitespace(text)) other.emplace_back(t);
      double score = rouge_n_tokens(features, other, 1).f1;
      bool same = entry_label == label;
      if ((same && !best_same_label) || (same == best_same_label && score > best_score)) {
        best = &explanation;
        best_score = score;
        best_same_label = same;
      }
    }
    return best ? *best : std::string();
  }
};

}  // namespace

BackendCapabilities BagOfWordsBackend::capabilities() const {
  return {4096, {WeightPrecision::FourBit, WeightPrecision::Full}};
}

Weights BagOfWordsBackend::base_weights() {
  Weights w = make_weights(BowModel{}.to_blob());
  w.handle = "bow:base";
  return w;
}

Weights BagOfWordsBackend::train(std::span<const PromptInstance> examples,
                                 const StageConfig& config, const Weights& init, std::uint64_t) {
  BowModel model = BowModel::from_blob(init.blob);
  for (const PromptInstance& example : examples) {
    ParsedPrediction target = parse_response(example.target_text);
    if (target.status == ParseStatus::Failed) {
      throw std::runtime_error("bow: target of record '" + example.record_id +
                               "' carries no label");
    }
    std::vector<std::string> features = prompt_features(example.input_text);
    const std::size_t k = label_index(target.label);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      model.documents[k] += 1.0;
      for (const auto& w : features) model.words[k][w] += 1.0;
      model.word_totals[k] += static_cast<double>(features.size());
    }
    if (!target.explanation.empty()) {
      model.memory[example.record_id] = {join(features), target.label, target.explanation};
    }
  }
  return make_weights(model.to_blob());
}

std::string BagOfWordsBackend::generate(const Weights& weights, const PromptInstance& prompt,
                                        const GenerationConfig& config) {
  BowModel model = BowModel::from_blob(weights.blob);
  std::vector<std::string> features = prompt_features(prompt.input_text);
  Label label = model.classify(features);
  std::string response = prompt.kind == PromptKind::Joint
                             ? joint_target(label, model.retrieve(features, label))
                             : std::string(encode_label(label));
  return cap_tokens(strip_prefix(response, prompt.response_prefix), config.max_new_tokens);
}

std::map<std::string, std::string> BagOfWordsBackend::training_defaults() const {
  return {{"model", "multinomial naive Bayes + nearest-neighbour explanation retrieval"},
          {"optimizer", "none (count accumulation, one pass per epoch)"},
          {"learning_rate", "ignored"},
          {"adapter", "ignored"}};
}

// ---------------------------------------------------------------------------
// RemoteBackend

RemoteBackend::RemoteBackend(std::string url, std::string token)
    : url_(std::move(url)), token_(std::move(token)) {
  while (!url_.empty() && url_.back() == '/') url_.pop_back();
}

std::string RemoteBackend::name() const { return "remote"; }

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  std::size_t scheme = url.find("://");
  std::size_t path = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path == std::string::npos) return {url, ""};
  return {url.substr(0, path), url.substr(path)};
}

httplib::Headers auth_headers(const std::string& token) {
  httplib::Headers headers;
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
  return headers;
}

std::string check_response(const httplib::Result& result, const std::string& what) {
  if (!result) {
    throw std::runtime_error(what + ": " + httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    throw std::runtime_error(what + ": HTTP " + std::to_string(result->status) + " " +
                             result->body);
  }
  return result->body;
}

}  // namespace

std::string RemoteBackend::post(const std::string& path, const std::string& body) const {
  auto [host, base] = split_url(url_);
  httplib::Client client(host);
  client.set_read_timeout(std::chrono::hours(48));
  client.set_write_timeout(std::chrono::minutes(10));
  return check_response(client.Post(base + path, auth_headers(token_), body, "application/json"),
                        "POST " + url_ + path);
}

std::string RemoteBackend::get(const std::string& path) const {
  auto [host, base] = split_url(url_);
  httplib::Client client(host);
  return check_response(client.Get(base + path, auth_headers(token_)), "GET " + url_ + path);
}

BackendCapabilities RemoteBackend::capabilities() const {
  Json j = Json::parse(get("/capabilities"));
  BackendCapabilities caps;
  caps.max_sequence_length = j.at("max_sequence_length").get<int>();
  for (const auto& p : j.at("precisions")) {
    if (auto precision = parse_precision(p.get<std::string>())) caps.precisions.push_back(*precision);
  }
  return caps;
}

Weights RemoteBackend::base_weights() { return {"remote:base", ""}; }

Weights RemoteBackend::train(std::span<const PromptInstance> examples, const StageConfig& config,
                             const Weights& init, std::uint64_t seed) {
  Json request;
  request["config"] = stage_json(config);
  request["init_weights"] = {{"handle", init.handle}, {"blob", init.blob}};
  request["seed"] = seed;
  request["examples"] = Json::array();
  for (const PromptInstance& e : examples) request["examples"].push_back(prompt_json(e));

  Json response = Json::parse(post("/train", request.dump()));
  const Json& w = response.at("weights");
  Weights out;
  out.blob = w.at("blob").get<std::string>();
  out.handle = w.value("handle", std::string());
  if (out.handle.empty()) out.handle = weights_handle_for(out.blob);
  return out;
}

std::string RemoteBackend::generate(const Weights& weights, const PromptInstance& prompt,
                                    const GenerationConfig& config) {
  Json request;
  request["weights"] = {{"handle", weights.handle}, {"blob", weights.blob}};
  request["prompt"] = prompt_json(prompt);
  request["max_new_tokens"] = config.max_new_tokens;
  request["decoding"] = "greedy";
  request["stop_sequences"] = config.stop_sequences;
  return Json::parse(post("/generate", request.dump())).at("text").get<std::string>();
}

std::map<std::string, std::string> RemoteBackend::training_defaults() const {
  Json j = Json::parse(get("/capabilities"));
  std::map<std::string, std::string> out;
  if (auto it = j.find("training_defaults"); it != j.end()) {
    for (const auto& [k, v] : it->items()) out[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  if (auto it = j.find("name"); it != j.end() && it->is_string()) out["service"] = *it;
  out["endpoint"] = url_;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> backend_names() { return {"echo", "mock", "bow", "remote"}; }

std::unique_ptr<TrainerBackend> make_backend(std::string_view name) {
  if (name == "echo" || name == "mock") return std::make_unique<EchoBackend>();
  if (name == "bow") return std::make_unique<BagOfWordsBackend>();
  if (name == "remote") {
    const char* url = std::getenv(std::string(kBackendUrlEnv).c_str());
    if (url == nullptr || *url == '\0') {
      throw std::runtime_error("backend 'remote' needs " + std::string(kBackendUrlEnv));
    }
    const char* token = std::getenv(std::string(kBackendTokenEnv).c_str());
    return std::make_unique<RemoteBackend>(url, token ? token : "");
  }
  return nullptr;
}

}  // namespace fmd
