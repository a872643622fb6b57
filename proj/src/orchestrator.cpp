// SPDX-License-Identifier: Apache-2.0
#include "fmd/orchestrator.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fmd/util.hpp"

namespace fmd {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kManifestFormat = "fmd-run-manifest/1";

struct Preset {
  std::string_view name;
  std::vector<std::pair<PromptKind, int>> stages;
};

const std::vector<Preset>& presets() {
  static const std::vector<Preset> kPresets = {
      {"seqwen", {{PromptKind::ClassificationOnly, 3}, {PromptKind::Joint, 5}}},
      {"joint5", {{PromptKind::Joint, 5}}},
      {"joint8", {{PromptKind::Joint, 8}}},
      {"cls3", {{PromptKind::ClassificationOnly, 3}}},
  };
  return kPresets;
}

std::string preset_list() {
  std::string out;
  for (const auto& p : presets()) {
    if (!out.empty()) out += ", ";
    out += p.name;
  }
  return out;
}

[[noreturn]] void config_error(std::size_t line, const std::string& message) {
  throw PlanError("plan config line " + std::to_string(line) + ": " + message);
}

int parse_int(std::string_view value, std::size_t line, std::string_view key) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    config_error(line, "'" + std::string(key) + "' expects an integer, got '" + std::string(value) +
                           "'");
  }
  return out;
}

double parse_double(std::string_view value, std::size_t line, std::string_view key) {
  try {
    std::size_t used = 0;
    double out = std::stod(std::string(value), &used);
    if (used == value.size()) return out;
  } catch (const std::exception&) {
  }
  config_error(line, "'" + std::string(key) + "' expects a number, got '" + std::string(value) + "'");
}

bool parse_bool(std::string_view value, std::size_t line, std::string_view key) {
  std::string v = to_lower_ascii(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  config_error(line, "'" + std::string(key) + "' expects true/false, got '" + std::string(value) +
                         "'");
}

struct Setting {
  std::string key;
  std::string value;
  std::size_t line;
};

void apply_setting(StageConfig& stage, const Setting& s) {
  const std::string& k = s.key;
  if (k == "prompt_kind") {
    auto kind = parse_prompt_kind(s.value);
    if (!kind) config_error(s.line, "unknown prompt_kind '" + s.value + "'");
    stage.prompt_kind = *kind;
  } else if (k == "epochs") {
    stage.epochs = parse_int(s.value, s.line, k);
  } else if (k == "learning_rate") {
    stage.learning_rate = parse_double(s.value, s.line, k);
  } else if (k == "max_sequence_length") {
    stage.max_sequence_length = parse_int(s.value, s.line, k);
  } else if (k == "total_batch_size") {
    stage.total_batch_size = parse_int(s.value, s.line, k);
  } else if (k == "adapter_rank") {
    stage.adapter_rank = parse_int(s.value, s.line, k);
  } else if (k == "adapter_alpha") {
    stage.adapter_alpha = parse_int(s.value, s.line, k);
  } else if (k == "weight_precision") {
    auto precision = parse_precision(s.value);
    if (!precision) config_error(s.line, "unknown weight_precision '" + s.value + "'");
    stage.weight_precision = *precision;
  } else if (k == "include_augmented") {
    stage.include_augmented = parse_bool(s.value, s.line, k);
  } else {
    config_error(s.line, "unknown stage key '" + k + "'");
  }
}

Json stage_to_json(const StageRecord& record, bool include_timestamps) {
  const StageConfig& c = record.config;
  Json j;
  j["prompt_kind"] = prompt_kind_name(c.prompt_kind);
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["max_sequence_length"] = c.max_sequence_length;
  j["total_batch_size"] = c.total_batch_size;
  j["adapter_rank"] = c.adapter_rank;
  j["adapter_alpha"] = c.adapter_alpha;
  j["weight_precision"] = precision_name(c.weight_precision);
  j["include_augmented"] = c.include_augmented;
  j["num_examples"] = record.num_examples;
  j["init_weights"] = record.init_weights;
  j["output_weights"] = record.output_weights;
  if (include_timestamps) j["completed_at"] = record.completed_at;
  return j;
}

StageRecord stage_from_json(const Json& j) {
  StageRecord record;
  StageConfig& c = record.config;
  auto kind = parse_prompt_kind(j.at("prompt_kind").get<std::string>());
  auto precision = parse_precision(j.at("weight_precision").get<std::string>());
  if (!kind || !precision) throw ArtifactError("manifest stage has an unknown kind or precision");
  c.prompt_kind = *kind;
  c.weight_precision = *precision;
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_sequence_length = j.at("max_sequence_length").get<int>();
  c.total_batch_size = j.at("total_batch_size").get<int>();
  c.adapter_rank = j.at("adapter_rank").get<int>();
  c.adapter_alpha = j.at("adapter_alpha").get<int>();
  c.include_augmented = j.at("include_augmented").get<bool>();
  record.num_examples = j.at("num_examples").get<std::size_t>();
  record.init_weights = j.at("init_weights").get<std::string>();
  record.output_weights = j.at("output_weights").get<std::string>();
  record.completed_at = j.value("completed_at", std::string());
  return record;
}

std::vector<ClaimRecord> stage_records(const StageConfig& stage,
                                       const std::vector<ClaimRecord>& records) {
  std::vector<ClaimRecord> out;
  for (const auto& r : records) {
    if (stage.include_augmented || !r.is_augmented) out.push_back(r);
  }
  return out;
}

}  // namespace

int SchedulePlan::total_epochs() const {
  return std::accumulate(stages.begin(), stages.end(), 0,
                         [](int sum, const StageConfig& s) { return sum + s.epochs; });
}

void SchedulePlan::validate() const {
  if (stages.empty()) throw PlanError("plan '" + name + "' has no stages");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    try {
      stages[i].validate();
    } catch (const std::invalid_argument& e) {
      throw PlanError("plan '" + name + "', stage " + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

std::vector<std::string> schedule_presets() {
  std::vector<std::string> out;
  for (const auto& p : presets()) out.emplace_back(p.name);
  return out;
}

SchedulePlan plan_schedule(std::string_view name) {
  for (const auto& p : presets()) {
    if (p.name != name) continue;
    SchedulePlan plan;
    plan.name = std::string(p.name);
    for (auto [kind, epochs] : p.stages) plan.stages.push_back(make_stage(kind, epochs));
    return plan;
  }
  throw PlanError("unknown plan '" + std::string(name) + "'; presets: " + preset_list());
}

SchedulePlan parse_schedule_config(std::string_view text) {
  std::string name;
  std::optional<std::string> preset;
  std::map<std::size_t, std::vector<Setting>> sections;
  std::optional<std::size_t> current;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') config_error(line_no, "unterminated section header");
      auto words = split_whitespace(line.substr(1, line.size() - 2));
      if (words.size() != 2 || words[0] != "stage") {
        config_error(line_no, "section must look like [stage N]");
      }
      int index = parse_int(words[1], line_no, "stage");
      if (index < 1) config_error(line_no, "stage numbers start at 1");
      current = static_cast<std::size_t>(index);
      sections[*current];
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string_view::npos) config_error(line_no, "expected key = value");
    std::string key = to_lower_ascii(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (current) {
      sections[*current].push_back({key, value, line_no});
    } else if (key == "name") {
      name = value;
    } else if (key == "preset") {
      preset = value;
    } else {
      config_error(line_no, "unknown top-level key '" + key + "'");
    }
  }

  SchedulePlan plan;
  if (preset) plan = plan_schedule(*preset);
  if (!name.empty()) plan.name = name;
  if (plan.name.empty()) plan.name = "custom";

  for (auto& [index, settings] : sections) {
    if (index <= plan.stages.size()) {
      for (const auto& s : settings) apply_setting(plan.stages[index - 1], s);
      continue;
    }
    if (index != plan.stages.size() + 1) {
      throw PlanError("plan config: [stage " + std::to_string(index) +
                      "] leaves a gap after stage " + std::to_string(plan.stages.size()));
    }
    auto find = [&](std::string_view key) {
      return std::find_if(settings.begin(), settings.end(),
                          [&](const Setting& s) { return s.key == key; });
    };
    auto kind_it = find("prompt_kind");
    if (kind_it == settings.end() || find("epochs") == settings.end()) {
      throw PlanError("plan config: new [stage " + std::to_string(index) +
                      "] needs prompt_kind and epochs");
    }
    StageConfig stage;
    apply_setting(stage, *kind_it);
    stage = make_stage(stage.prompt_kind, 1);
    for (const auto& s : settings) apply_setting(stage, s);
    plan.stages.push_back(stage);
  }
  plan.validate();
  return plan;
}

SchedulePlan load_schedule_config(const std::filesystem::path& path) {
  return parse_schedule_config(read_file(path));
}

int RunManifest::total_epochs() const {
  return std::accumulate(stages.begin(), stages.end(), 0,
                         [](int sum, const StageRecord& s) { return sum + s.config.epochs; });
}

std::string manifest_to_json(const RunManifest& manifest, bool include_timestamps) {
  Json j;
  j["format"] = kManifestFormat;
  j["schedule"] = manifest.schedule_name;
  j["backend"] = manifest.backend;
  j["backend_defaults"] = Json::object();
  for (const auto& [k, v] : manifest.backend_defaults) j["backend_defaults"][k] = v;
  j["dataset_checksum"] = manifest.dataset_checksum;
  j["seed"] = manifest.seed;
  j["total_epochs"] = manifest.total_epochs();
  j["stages"] = Json::array();
  for (const auto& stage : manifest.stages) {
    j["stages"].push_back(stage_to_json(stage, include_timestamps));
  }
  j["weights_checksum"] = manifest.weights_checksum;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  try {
    Json j = Json::parse(text);
    if (j.value("format", std::string()) != kManifestFormat) {
      throw ArtifactError("unsupported manifest format");
    }
    RunManifest m;
    m.schedule_name = j.at("schedule").get<std::string>();
    m.backend = j.at("backend").get<std::string>();
    for (const auto& [k, v] : j.at("backend_defaults").items()) {
      m.backend_defaults[k] = v.get<std::string>();
    }
    m.dataset_checksum = j.at("dataset_checksum").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("stages")) m.stages.push_back(stage_from_json(s));
    m.weights_checksum = j.at("weights_checksum").get<std::string>();
    if (j.at("total_epochs").get<int>() != m.total_epochs()) {
      throw ArtifactError("manifest total_epochs disagrees with its stages");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("malformed manifest: ") + e.what());
  }
}

void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  RunManifest manifest = artifact.manifest;
  manifest.weights_checksum = sha256_hex(artifact.weights.blob);
  write_file(dir / "weights.bin", artifact.weights.blob);
  write_file(dir / "manifest.json", manifest_to_json(manifest));
}

ModelArtifact load_artifact(const std::filesystem::path& dir) {
  std::string manifest_text;
  std::string blob;
  try {
    manifest_text = read_file(dir / "manifest.json");
    blob = read_file(dir / "weights.bin");
  } catch (const std::runtime_error& e) {
    throw ArtifactError(e.what());
  }
  ModelArtifact artifact;
  artifact.manifest = manifest_from_json(manifest_text);
  if (sha256_hex(blob) != artifact.manifest.weights_checksum) {
    throw ArtifactError("checksum mismatch for '" + (dir / "weights.bin").string() +
                        "': file is truncated or modified");
  }
  if (artifact.manifest.stages.empty()) throw ArtifactError("manifest lists no stages");
  artifact.weights.handle = artifact.manifest.stages.back().output_weights;
  artifact.weights.blob = std::move(blob);
  return artifact;
}

std::string dataset_checksum(const std::vector<ClaimRecord>& records) {
  return sha256_hex(serialize_dataset(records, DataFormat::JsonLines));
}

void preflight_schedule(const SchedulePlan& plan, const std::vector<ClaimRecord>& train_records,
                        const TrainerBackend& backend) {
  plan.validate();
  const BackendCapabilities caps = backend.capabilities();
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    const StageConfig& stage = plan.stages[i];
    const std::string where = "stage " + std::to_string(i + 1) + " (" +
                              std::string(prompt_kind_name(stage.prompt_kind)) + ")";
    if (!caps.supports(stage.weight_precision)) {
      throw PlanError(where + ": backend '" + backend.name() + "' does not support " +
                      std::string(precision_name(stage.weight_precision)) + " weights");
    }
    if (stage.max_sequence_length > caps.max_sequence_length) {
      throw PlanError(where + ": max_sequence_length " +
                      std::to_string(stage.max_sequence_length) + " exceeds backend limit " +
                      std::to_string(caps.max_sequence_length));
    }
    std::size_t used = 0;
    for (const ClaimRecord& r : train_records) {
      if (r.is_augmented && !stage.include_augmented) continue;
      ++used;
      if (!r.label) throw PlanError(where + ": record '" + r.id + "' has no label");
      if (stage.prompt_kind == PromptKind::Joint && trim(r.explanation).empty()) {
        throw PlanError(where + ": record '" + r.id + "' lacks an explanation target");
      }
    }
    if (used == 0) throw PlanError(where + ": no training records");
  }
}

ModelArtifact run_schedule(const SchedulePlan& plan, const std::vector<ClaimRecord>& train_records,
                           TrainerBackend& backend, std::uint64_t seed,
                           const RunOptions& options) {
  preflight_schedule(plan, train_records, backend);

  RunManifest manifest;
  manifest.schedule_name = plan.name;
  manifest.backend = backend.name();
  manifest.backend_defaults = backend.training_defaults();
  manifest.dataset_checksum = dataset_checksum(train_records);
  manifest.seed = seed;

  std::optional<ModelArtifact> checkpoint;
  Weights current = backend.base_weights();

  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    const StageConfig& stage = plan.stages[i];
    std::vector<PromptInstance> examples;
    for (const ClaimRecord& r : stage_records(stage, train_records)) {
      examples.push_back(render_prompt(r, stage.prompt_kind, /*include_target=*/true));
    }

    Weights next;
    try {
      next = backend.train(examples, stage, current, seed);
    } catch (const std::exception& e) {
      throw ScheduleError("stage " + std::to_string(i + 1) + " of plan '" + plan.name +
                              "' failed in backend '" + backend.name() + "': " + e.what(),
                          i, checkpoint);
    }

    StageRecord record;
    record.config = stage;
    record.num_examples = examples.size();
    record.init_weights = current.handle;
    record.output_weights = next.handle;
    record.completed_at = utc_timestamp_now();
    manifest.stages.push_back(std::move(record));
    manifest.weights_checksum = sha256_hex(next.blob);

    current = std::move(next);
    checkpoint = ModelArtifact{current, manifest};
    if (options.checkpoint_dir) {
      save_artifact(*checkpoint, *options.checkpoint_dir / ("stage_" + std::to_string(i + 1)));
    }
  }
  return std::move(*checkpoint);
}

}  // namespace fmd
