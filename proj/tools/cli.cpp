// SPDX-License-Identifier: Apache-2.0
#include "fmd/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fmd/backends.hpp"
#include "fmd/dataset.hpp"
#include "fmd/inference.hpp"
#include "fmd/metrics.hpp"
#include "fmd/orchestrator.hpp"
#include "fmd/prompts.hpp"
#include "fmd/util.hpp"

#ifndef FMD_VERSION
#define FMD_VERSION "0.0.0"
#endif

namespace fmd::cli {

namespace fs = std::filesystem;

namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kExperimentFile = "experiment.json";
constexpr std::string_view kExperimentFormat = "fmd-experiment/1";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The experiment manifest lives in the nearest ancestor of `start` that
// already has one, else in `start` itself.
fs::path experiment_path(const fs::path& start) {
  fs::path dir = fs::absolute(start).lexically_normal();
  for (fs::path probe = dir; !probe.empty(); probe = probe.parent_path()) {
    if (fs::exists(probe / kExperimentFile)) return probe / kExperimentFile;
    if (probe == probe.parent_path()) break;
  }
  return dir / kExperimentFile;
}

void update_experiment(const fs::path& start, const std::string& section, Json entry) {
  fs::path path = experiment_path(start);
  Json manifest;
  if (fs::exists(path)) {
    manifest = Json::parse(read_file(path), nullptr, /*allow_exceptions=*/false);
    if (manifest.is_discarded() || !manifest.is_object()) manifest = Json::object();
  }
  manifest["format"] = kExperimentFormat;
  if (!manifest.contains("experiment")) manifest["experiment"] = path.parent_path().filename().string();
  manifest["tool_version"] = FMD_VERSION;
  manifest[section] = std::move(entry);
  write_file(path, manifest.dump(2) + "\n");
}

std::size_t parse_min_tokens(const std::string& text) {
  std::string v = to_lower_ascii(trim(text));
  if (v == "none" || v == "off" || v == "inf" || v == "disable") return kAugmentDisabled;
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw UsageError("--min-aug-tokens expects an integer or 'none', got '" + text + "'");
  }
  return out;
}

ClassCounts parse_quota(const std::string& text) {
  ClassCounts quota{};
  std::size_t k = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    std::string_view part = trim(std::string_view(text).substr(pos, comma - pos));
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (k >= kNumLabels || part.empty() || ec != std::errc() || ptr != part.data() + part.size()) {
      throw UsageError("--dev-quota expects three counts 'false,true,nei', got '" + text + "'");
    }
    quota[k++] = value;
    pos = comma + 1;
  }
  if (k != kNumLabels) {
    throw UsageError("--dev-quota expects three counts 'false,true,nei', got '" + text + "'");
  }
  return quota;
}

Json counts_json(const ClassCounts& train, const ClassCounts& dev) {
  Json j = Json::object();
  for (Label c : kAllLabels) {
    j[std::string(label_display_name(c))] = {{"train", train[label_index(c)]},
                                             {"dev", dev[label_index(c)]}};
  }
  return j;
}

std::unique_ptr<TrainerBackend> backend_or_usage(const std::string& name) {
  auto backend = make_backend(name);
  if (!backend) {
    std::string names;
    for (const auto& n : backend_names()) names += (names.empty() ? "" : ", ") + n;
    throw UsageError("unknown backend '" + name + "'; available: " + names);
  }
  return backend;
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string data;
  std::string out;
  std::uint64_t seed = 42;
  std::size_t dev_count = 0;
  std::string dev_quota;
  std::string min_aug_tokens = std::to_string(kDefaultAugmentMinTokens);
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  const std::size_t min_tokens = parse_min_tokens(a.min_aug_tokens);
  SplitOptions options;
  if (!a.dev_quota.empty()) options.dev_quota = parse_quota(a.dev_quota);

  std::vector<ClaimRecord> records = load_dataset(a.data);
  if (std::any_of(records.begin(), records.end(), [](const auto& r) { return r.is_augmented; })) {
    throw DataError("input already contains augmented records; prepare expects original data");
  }
  DatasetSplit split = split_train_dev(records, a.dev_count, a.seed, options);
  std::vector<ClaimRecord> train = augment_with_justification_claims(split.train, min_tokens);
  const std::size_t augmented = train.size() - split.train.size();

  fs::path dir(a.out);
  save_dataset(train, dir / "train.jsonl", DataFormat::JsonLines);
  save_dataset(split.dev, dir / "dev.jsonl", DataFormat::JsonLines);

  Json manifest;
  manifest["input"] = a.data;
  manifest["input_checksum"] = sha256_file(a.data);
  manifest["input_records"] = records.size();
  manifest["seed"] = a.seed;
  manifest["dev_count"] = a.dev_count;
  manifest["dev_allocation"] = options.dev_quota ? "explicit_quota" : "largest_remainder";
  manifest["counts"] = counts_json(split.train_counts, split.dev_counts);
  manifest["augmentation"] = {
      {"min_tokens", min_tokens == kAugmentDisabled ? Json("disabled") : Json(min_tokens)},
      {"augmented_records", augmented}};
  manifest["train_file"] = {{"path", "train.jsonl"},
                            {"records", train.size()},
                            {"checksum", sha256_file(dir / "train.jsonl")}};
  manifest["dev_file"] = {{"path", "dev.jsonl"},
                          {"records", split.dev.size()},
                          {"checksum", sha256_file(dir / "dev.jsonl")}};
  write_file(dir / "split_manifest.json", manifest.dump(2) + "\n");
  update_experiment(dir, "prepare",
                    {{"dataset_checksum", manifest["input_checksum"]},
                     {"split_seed", a.seed},
                     {"split_manifest", (dir / "split_manifest.json").string()}});

  out << "split " << records.size() << " records (seed " << a.seed << ")\n";
  for (Label c : kAllLabels) {
    out << "  " << label_display_name(c) << ": train " << split.train_counts[label_index(c)]
        << ", dev " << split.dev_counts[label_index(c)] << "\n";
  }
  out << "  augmented train records: " << augmented << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string plan;
  std::string plan_file;
  std::string data;
  std::string backend = "bow";
  std::string out;
  std::uint64_t seed = 42;
  bool checkpoints = true;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  SchedulePlan plan;
  if (!a.plan_file.empty()) {
    plan = load_schedule_config(a.plan_file);
  } else {
    auto presets = schedule_presets();
    if (std::find(presets.begin(), presets.end(), a.plan) == presets.end()) {
      std::string list;
      for (const auto& p : presets) list += (list.empty() ? "" : ", ") + p;
      throw UsageError("unknown plan '" + a.plan + "'; presets: " + list);
    }
    plan = plan_schedule(a.plan);
  }
  auto backend = backend_or_usage(a.backend);
  std::vector<ClaimRecord> records = load_dataset(a.data);

  fs::path dir(a.out);
  RunOptions options;
  if (a.checkpoints) options.checkpoint_dir = dir / "checkpoints";
  ModelArtifact artifact = run_schedule(plan, records, *backend, a.seed, options);
  save_artifact(artifact, dir);

  Json stages = Json::array();
  for (const auto& s : artifact.manifest.stages) {
    stages.push_back({{"prompt_kind", prompt_kind_name(s.config.prompt_kind)},
                      {"epochs", s.config.epochs}});
  }
  update_experiment(dir, "train",
                    {{"schedule", plan.name},
                     {"stages", stages},
                     {"total_epochs", artifact.manifest.total_epochs()},
                     {"backend", backend->name()},
                     {"seed", a.seed},
                     {"dataset_checksum", artifact.manifest.dataset_checksum},
                     {"model_manifest", (dir / "manifest.json").string()}});

  out << "trained plan '" << plan.name << "' on " << records.size() << " records with backend '"
      << backend->name() << "'\n";
  for (std::size_t i = 0; i < artifact.manifest.stages.size(); ++i) {
    const auto& s = artifact.manifest.stages[i];
    out << "  stage " << i + 1 << ": " << prompt_kind_name(s.config.prompt_kind) << " x "
        << s.config.epochs << " epochs, " << s.num_examples << " examples\n";
  }
  out << "  total epochs: " << artifact.manifest.total_epochs() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct InferArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string backend;
  std::string kind;
  int max_new_tokens = 512;
  std::string fallback_label = "not_enough_info";
};

int cmd_infer(const InferArgs& a, std::ostream& out, std::ostream& err) {
  ModelArtifact model = load_artifact(a.model);
  auto backend = backend_or_usage(a.backend.empty() ? model.manifest.backend : a.backend);

  PromptKind kind = model.manifest.stages.back().config.prompt_kind;
  if (!a.kind.empty()) {
    auto parsed = parse_prompt_kind(a.kind);
    if (!parsed) throw UsageError("unknown --kind '" + a.kind + "'");
    kind = *parsed;
  }
  ParseOptions parse_options;
  auto fallback = decode_label(a.fallback_label);
  if (!fallback) throw UsageError("unknown --fallback-label '" + a.fallback_label + "'");
  parse_options.fallback_label = *fallback;

  GenerationConfig config;
  config.max_new_tokens = a.max_new_tokens;
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::vector<ClaimRecord> records = load_dataset(a.data);
  std::vector<PromptInstance> prompts;
  prompts.reserve(records.size());
  for (const auto& r : records) prompts.push_back(render_prompt(r, kind, /*include_target=*/false));

  std::vector<GenerationResult> results = generate(model, prompts, config, *backend);
  std::size_t errors = 0;
  for (const auto& r : results) {
    if (r.error) {
      ++errors;
      err << "warning: record '" << r.record_id << "': " << *r.error << "\n";
    }
  }
  ParseCounters counters;
  std::vector<ParsedPrediction> predictions = parse_generations(results, counters, parse_options);
  write_file(a.out, predictions_to_jsonl(predictions));

  fs::path out_path(a.out);
  update_experiment(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."), "infer",
                    {{"model", a.model},
                     {"backend", backend->name()},
                     {"prompt_kind", prompt_kind_name(kind)},
                     {"generation_config",
                      {{"max_new_tokens", config.max_new_tokens},
                       {"decoding", "greedy"},
                       {"stop_sequences", config.stop_sequences}}},
                     {"predictions", a.out},
                     {"parse_counts",
                      {{"clean", counters.clean},
                       {"fallback", counters.fallback},
                       {"failed", counters.failed}}},
                     {"generation_errors", errors}});

  out << "wrote " << predictions.size() << " predictions to " << a.out << " (clean "
      << counters.clean << ", fallback " << counters.fallback << ", failed " << counters.failed
      << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, EvaluationReport>> load_reports(
    const std::vector<std::string>& paths) {
  std::vector<std::pair<std::string, EvaluationReport>> runs;
  for (const auto& path : paths) {
    std::string text = read_file(path);
    Json j = Json::parse(text, nullptr, false);
    std::string name = (!j.is_discarded() && j.contains("run") && j["run"].is_string())
                           ? j["run"].get<std::string>()
                           : fs::path(path).stem().string();
    runs.emplace_back(name, report_from_json(text));
  }
  return runs;
}

struct ScoreArgs {
  std::string pred;
  std::string gold;
  std::string out;
  std::string name;
  std::vector<std::string> compare;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  if (a.pred.empty() && a.compare.empty()) {
    throw UsageError("score needs --pred/--gold or --compare");
  }
  std::vector<std::pair<std::string, EvaluationReport>> runs = load_reports(a.compare);

  if (!a.pred.empty()) {
    if (a.gold.empty()) throw UsageError("--pred requires --gold");
    std::vector<ParsedPrediction> predictions = load_predictions(a.pred);
    std::vector<ClaimRecord> golds = load_dataset(a.gold);
    EvaluationReport report = evaluate_run(predictions, golds);
    std::string name = a.name.empty() ? fs::path(a.pred).stem().string() : a.name;

    if (!a.out.empty()) {
      fs::path json_path(a.out);
      fs::path md_path = json_path;
      md_path.replace_extension(".md");
      write_file(json_path, report_to_json(report, name));
      write_file(md_path, markdown_table_header() + markdown_row(name, report) + "\n```\n" +
                              confusion_to_text(report.confusion) + "```\n");
      update_experiment(json_path.has_parent_path() ? json_path.parent_path() : fs::path("."),
                        "score",
                        {{"report", a.out},
                         {"overall", report.overall},
                         {"micro_f1", report.micro_f1},
                         {"rouge1_f1", report.rouge1.f1},
                         {"failed_parse_rate", report.failed_parse_rate}});
    }
    if (runs.empty()) {
      out << markdown_table_header() << markdown_row(name, report) << "\n"
          << confusion_to_text(report.confusion);
      out << "failed parses: " << report.failed_parses << " / " << report.num_records << "\n";
      return kExitOk;
    }
    runs.emplace_back(name, report);
  }

  std::string table = markdown_comparison(std::move(runs));
  if (a.pred.empty() && !a.out.empty()) write_file(a.out, table);
  out << table;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage fine-tuning and evaluation pipeline for financial claim verification",
               "fmdpipe"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FMD_VERSION);

  PrepareArgs prepare;
  auto* prep = app.add_subcommand("prepare", "Validate a labeled file and write train/dev splits");
  prep->add_option("--data", prepare.data, "Labeled input (.csv or .jsonl)")->required();
  prep->add_option("--out", prepare.out, "Output directory")->required();
  prep->add_option("--seed", prepare.seed, "Split seed");
  prep->add_option("--dev-count", prepare.dev_count, "Number of dev records")->required();
  prep->add_option("--dev-quota", prepare.dev_quota,
                   "Explicit per-class dev counts 'false,true,nei' (must sum to --dev-count)");
  prep->add_option("--min-aug-tokens", prepare.min_aug_tokens,
                   "Minimum tokens for a justification sentence to become a claim, or 'none'");

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Run a fine-tuning schedule");
  auto* plan_opt = tr->add_option("--plan", train.plan, "Preset: seqwen, joint5, joint8, cls3");
  auto* plan_file_opt = tr->add_option("--plan-file", train.plan_file, "key=value plan file");
  plan_opt->excludes(plan_file_opt);
  tr->add_option("--data", train.data, "Training records")->required();
  tr->add_option("--backend", train.backend, "Trainer backend: echo|mock, bow, remote");
  tr->add_option("--seed", train.seed, "Training seed");
  tr->add_option("--out", train.out, "Model directory")->required();
  tr->add_flag("!--no-checkpoints", train.checkpoints, "Skip per-stage checkpoints");

  InferArgs infer;
  auto* inf = app.add_subcommand("infer", "Generate and parse predictions");
  inf->add_option("--model", infer.model, "Model directory")->required();
  inf->add_option("--data", infer.data, "Records to predict")->required();
  inf->add_option("--out", infer.out, "Predictions (.jsonl)")->required();
  inf->add_option("--backend", infer.backend, "Override the backend recorded in the model");
  inf->add_option("--kind", infer.kind, "Prompt kind (default: kind of the last stage)");
  inf->add_option("--max-new-tokens", infer.max_new_tokens, "Generation budget");
  inf->add_option("--fallback-label", infer.fallback_label, "Label for unparseable output");

  ScoreArgs score;
  auto* sc = app.add_subcommand("score", "Score predictions against gold records");
  sc->add_option("--pred", score.pred, "Predictions (.jsonl)");
  sc->add_option("--gold", score.gold, "Gold records");
  sc->add_option("--out", score.out, "Report json (markdown written next to it)");
  sc->add_option("--name", score.name, "Run name in tables");
  sc->add_option("--compare", score.compare, "Report json files to tabulate");

  ScoreArgs report;
  auto* rep = app.add_subcommand("report", "Tabulate report json files (same as score --compare)");
  rep->add_option("reports", report.compare, "Report json files")->required();
  rep->add_option("--out", report.out, "Markdown output");

  std::string template_kind = "joint";
  auto* tmpl = app.add_subcommand("template", "Print a prompt template");
  tmpl->add_option("--kind", template_kind, "joint or classification_only");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (prep->parsed()) return cmd_prepare(prepare, out);
    if (tr->parsed()) {
      if (train.plan.empty() && train.plan_file.empty()) {
        throw UsageError("train needs --plan or --plan-file");
      }
      return cmd_train(train, out);
    }
    if (inf->parsed()) return cmd_infer(infer, out, err);
    if (sc->parsed()) return cmd_score(score, out);
    if (rep->parsed()) return cmd_score(report, out);
    if (tmpl->parsed()) {
      auto kind = parse_prompt_kind(template_kind);
      if (!kind) throw UsageError("unknown --kind '" + template_kind + "'");
      out << prompt_template(*kind) << "\n";
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace fmd::cli
