// SPDX-License-Identifier: Apache-2.0
#include "fmd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fmd/util.hpp"

namespace fmd {

namespace {

using Json = nlohmann::ordered_json;

void check_lengths(std::size_t predictions, std::size_t golds) {
  if (predictions != golds) {
    throw MetricError("predictions (" + std::to_string(predictions) + ") and golds (" +
                      std::to_string(golds) + ") differ in length");
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

RougeScore from_counts(std::size_t hits, std::size_t candidate_total, std::size_t reference_total) {
  RougeScore score;
  score.precision = ratio(hits, candidate_total);
  score.recall = ratio(hits, reference_total);
  score.f1 = f_measure(score.precision, score.recall);
  return score;
}

std::optional<RougeScore> empty_side(std::size_t candidate_tokens, std::size_t reference_tokens) {
  if (candidate_tokens == 0 && reference_tokens == 0) return RougeScore{1.0, 1.0, 1.0};
  if (candidate_tokens == 0 || reference_tokens == 0) return RougeScore{};
  return std::nullopt;
}

using NgramCounts = std::map<std::vector<std::string_view>, std::size_t>;

NgramCounts count_ngrams(std::span<const std::string> tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::vector<std::string_view> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[std::move(gram)];
  }
  return counts;
}

Json score_json(const RougeScore& s) {
  return Json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

RougeScore score_from_json(const Json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t sum = 0;
  for (const auto& row : counts) {
    for (std::size_t v : row) sum += v;
  }
  return sum;
}

std::size_t ConfusionMatrix::row_sum(Label gold) const {
  std::size_t sum = 0;
  for (std::size_t v : counts[label_index(gold)]) sum += v;
  return sum;
}

std::size_t ConfusionMatrix::column_sum(Label predicted) const {
  std::size_t sum = 0;
  for (const auto& row : counts) sum += row[label_index(predicted)];
  return sum;
}

double f_measure(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double micro_f1(std::span<const Label> predictions, std::span<const Label> golds) {
  check_lengths(predictions.size(), golds.size());
  if (golds.empty()) throw MetricError("micro_f1 needs at least one prediction");

  std::size_t tp = 0, fp = 0, fn = 0;
  for (Label c : kAllLabels) {
    for (std::size_t i = 0; i < golds.size(); ++i) {
      bool predicted = predictions[i] == c;
      bool actual = golds[i] == c;
      tp += predicted && actual;
      fp += predicted && !actual;
      fn += !predicted && actual;
    }
  }
  return f_measure(ratio(tp, tp + fp), ratio(tp, tp + fn));
}

ConfusionMatrix confusion_matrix(std::span<const Label> predictions, std::span<const Label> golds) {
  check_lengths(predictions.size(), golds.size());
  ConfusionMatrix m;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    ++m.counts[label_index(golds[i])][label_index(predictions[i])];
  }
  return m;
}

std::array<ClassStats, kNumLabels> per_class_stats(const ConfusionMatrix& confusion) {
  std::array<ClassStats, kNumLabels> stats{};
  for (Label c : kAllLabels) {
    std::size_t k = label_index(c);
    ClassStats& s = stats[k];
    s.support = confusion.row_sum(c);
    s.precision = ratio(confusion.counts[k][k], confusion.column_sum(c));
    s.recall = ratio(confusion.counts[k][k], s.support);
    s.f1 = f_measure(s.precision, s.recall);
  }
  return stats;
}

std::vector<std::string> tokenize_for_rouge(std::string_view text) {
  std::string cleaned(text);
  for (char& c : cleaned) {
    auto u = static_cast<unsigned char>(c);
    if (u >= 0x80) continue;
    c = std::isalnum(u) ? static_cast<char>(std::tolower(u)) : ' ';
  }
  std::vector<std::string> tokens;
  for (std::string_view t : split_whitespace(cleaned)) tokens.emplace_back(t);
  return tokens;
}

RougeScore rouge_n_tokens(std::span<const std::string> candidate,
                          std::span<const std::string> reference, int n) {
  if (n < 1) throw MetricError("rouge_n needs n >= 1, got " + std::to_string(n));
  if (auto fixed = empty_side(candidate.size(), reference.size())) return *fixed;

  const auto un = static_cast<std::size_t>(n);
  NgramCounts cand = count_ngrams(candidate, un);
  NgramCounts ref = count_ngrams(reference, un);
  std::size_t hits = 0;
  for (const auto& [gram, c] : cand) {
    if (auto it = ref.find(gram); it != ref.end()) hits += std::min(c, it->second);
  }
  std::size_t cand_total = candidate.size() >= un ? candidate.size() - un + 1 : 0;
  std::size_t ref_total = reference.size() >= un ? reference.size() - un + 1 : 0;
  return from_counts(hits, cand_total, ref_total);
}

RougeScore rouge_l_tokens(std::span<const std::string> candidate,
                          std::span<const std::string> reference) {
  if (auto fixed = empty_side(candidate.size(), reference.size())) return *fixed;

  std::vector<std::size_t> prev(reference.size() + 1, 0), row(reference.size() + 1, 0);
  for (std::size_t i = 1; i <= candidate.size(); ++i) {
    for (std::size_t j = 1; j <= reference.size(); ++j) {
      row[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], row[j - 1]);
    }
    std::swap(prev, row);
  }
  return from_counts(prev[reference.size()], candidate.size(), reference.size());
}

RougeScore rouge_n(std::string_view candidate, std::string_view reference, int n) {
  return rouge_n_tokens(tokenize_for_rouge(candidate), tokenize_for_rouge(reference), n);
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  return rouge_l_tokens(tokenize_for_rouge(candidate), tokenize_for_rouge(reference));
}

RougeScore aggregate_rouge(std::span<const std::pair<std::string, std::string>> pairs,
                           RougeVariant variant) {
  RougeScore mean;
  if (pairs.empty()) return mean;
  for (const auto& [candidate, reference] : pairs) {
    RougeScore s;
    switch (variant) {
      case RougeVariant::Rouge1: s = rouge_n(candidate, reference, 1); break;
      case RougeVariant::Rouge2: s = rouge_n(candidate, reference, 2); break;
      case RougeVariant::RougeL: s = rouge_l(candidate, reference); break;
    }
    mean.precision += s.precision;
    mean.recall += s.recall;
    mean.f1 += s.f1;
  }
  const auto n = static_cast<double>(pairs.size());
  mean.precision /= n;
  mean.recall /= n;
  mean.f1 /= n;
  return mean;
}

double overall_score(double micro, double rouge1_f1) {
  auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_range(micro) || !in_range(rouge1_f1)) {
    throw MetricError(fmt::format("overall_score inputs must lie in [0, 1], got ({}, {})", micro,
                                  rouge1_f1));
  }
  return (micro + rouge1_f1) / 2.0;
}

EvaluationReport evaluate_run(const std::vector<ParsedPrediction>& parsed,
                              const std::vector<ClaimRecord>& golds) {
  std::unordered_map<std::string_view, const ParsedPrediction*> by_id;
  for (const ParsedPrediction& p : parsed) {
    if (!by_id.emplace(p.record_id, &p).second) {
      throw MetricError("duplicate prediction for record_id '" + p.record_id + "'");
    }
  }

  std::vector<Label> predicted, actual;
  std::vector<std::pair<std::string, std::string>> pairs;
  std::unordered_set<std::string_view> gold_ids;
  EvaluationReport report;
  for (const ClaimRecord& gold : golds) {
    if (!gold_ids.insert(gold.id).second) {
      throw MetricError("duplicate gold record_id '" + gold.id + "'");
    }
    if (!gold.label) throw MetricError("gold record '" + gold.id + "' has no label");
    auto it = by_id.find(gold.id);
    if (it == by_id.end()) throw MetricError("missing prediction for record_id '" + gold.id + "'");
    const ParsedPrediction& p = *it->second;
    predicted.push_back(p.label);
    actual.push_back(*gold.label);
    pairs.emplace_back(p.explanation, gold.explanation);
    report.failed_parses += p.status == ParseStatus::Failed;
  }
  for (const ParsedPrediction& p : parsed) {
    if (!gold_ids.contains(p.record_id)) {
      throw MetricError("prediction for unknown record_id '" + p.record_id + "'");
    }
  }

  report.num_records = golds.size();
  report.micro_f1 = micro_f1(predicted, actual);
  report.confusion = confusion_matrix(predicted, actual);
  report.per_class = per_class_stats(report.confusion);
  report.rouge1 = aggregate_rouge(pairs, RougeVariant::Rouge1);
  report.rouge2 = aggregate_rouge(pairs, RougeVariant::Rouge2);
  report.rougeL = aggregate_rouge(pairs, RougeVariant::RougeL);
  report.overall = overall_score(report.micro_f1, report.rouge1.f1);
  report.failed_parse_rate = ratio(report.failed_parses, report.num_records);
  return report;
}

std::string report_to_json(const EvaluationReport& report, std::string_view run_name) {
  Json j;
  j["report_version"] = kReportVersion;
  if (!run_name.empty()) j["run"] = run_name;
  j["num_records"] = report.num_records;
  j["micro_f1"] = report.micro_f1;
  j["per_class"] = Json::object();
  for (Label c : kAllLabels) {
    const ClassStats& s = report.per_class[label_index(c)];
    j["per_class"][std::string(label_display_name(c))] = {
        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
  }
  Json labels = Json::array();
  for (Label c : kAllLabels) labels.push_back(label_display_name(c));
  j["confusion"] = {{"labels", labels}, {"counts", report.confusion.counts}};
  j["rouge1"] = score_json(report.rouge1);
  j["rouge2"] = score_json(report.rouge2);
  j["rougeL"] = score_json(report.rougeL);
  j["overall"] = report.overall;
  j["failed_parses"] = report.failed_parses;
  j["failed_parse_rate"] = report.failed_parse_rate;
  j["markdown_row"] = markdown_row(run_name.empty() ? "run" : run_name, report);
  j["confusion_text"] = confusion_to_text(report.confusion);
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(std::string_view text) {
  try {
    Json j = Json::parse(text);
    if (j.at("report_version").get<int>() != kReportVersion) {
      throw MetricError("unsupported report_version " + j.at("report_version").dump());
    }
    EvaluationReport r;
    r.num_records = j.at("num_records").get<std::size_t>();
    r.micro_f1 = j.at("micro_f1").get<double>();
    for (Label c : kAllLabels) {
      const Json& s = j.at("per_class").at(std::string(label_display_name(c)));
      r.per_class[label_index(c)] = {s.at("precision").get<double>(), s.at("recall").get<double>(),
                                     s.at("f1").get<double>(), s.at("support").get<std::size_t>()};
    }
    r.confusion.counts = j.at("confusion").at("counts").get<decltype(r.confusion.counts)>();
    r.rouge1 = score_from_json(j.at("rouge1"));
    r.rouge2 = score_from_json(j.at("rouge2"));
    r.rougeL = score_from_json(j.at("rougeL"));
    r.overall = j.at("overall").get<double>();
    r.failed_parses = j.at("failed_parses").get<std::size_t>();
    r.failed_parse_rate = j.at("failed_parse_rate").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw MetricError(std::string("malformed report: ") + e.what());
  }
}

std::string markdown_table_header() {
  return "| Model | Micro F1 | ROUGE-1 | ROUGE-2 | ROUGE-L | Overall Score |\n"
         "|---|---|---|---|---|---|\n";
}

std::string markdown_row(std::string_view name, const EvaluationReport& report) {
  return fmt::format("| {} | {:.4f} | {:.4f} | {:.4f} | {:.4f} | {:.4f} |\n", name, report.micro_f1,
                     report.rouge1.f1, report.rouge2.f1, report.rougeL.f1, report.overall);
}

std::string markdown_comparison(std::vector<std::pair<std::string, EvaluationReport>> runs) {
  std::stable_sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
    return a.second.overall > b.second.overall;
  });
  std::string out = markdown_table_header();
  for (const auto& [name, report] : runs) out += markdown_row(name, report);
  return out;
}

std::string confusion_to_text(const ConfusionMatrix& confusion) {
  std::size_t width = 5;
  for (const auto& row : confusion.counts) {
    for (std::size_t v : row) width = std::max(width, std::to_string(v).size());
  }
  std::string out = fmt::format("{:<12}", "gold\\pred");
  for (Label c : kAllLabels) out += fmt::format(" {:>{}}", label_display_name(c), width);
  out += "\n";
  for (Label g : kAllLabels) {
    out += fmt::format("{:<12}", label_display_name(g));
    for (Label p : kAllLabels) {
      out += fmt::format(" {:>{}}", confusion.counts[label_index(g)][label_index(p)], width);
    }
    out += "\n";
  }
  return out;
}

}  // namespace fmd
