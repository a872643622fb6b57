// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fmd/dataset.hpp"
#include "fmd/inference.hpp"
#include "fmd/label.hpp"

namespace fmd {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bumped whenever tokenization or aggregation changes.
inline constexpr int kReportVersion = 1;

struct ConfusionMatrix {
  // counts[gold][predicted], indexed by label code.
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> counts{};

  std::size_t total() const;
  std::size_t row_sum(Label gold) const;
  std::size_t column_sum(Label predicted) const;

  bool operator==(const ConfusionMatrix&) const = default;
};

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

double f_measure(double precision, double recall);

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

// Micro-averaged F1 over the three classes. With exactly one label per item
// every error is one false positive and one false negative, so this equals
// accuracy.
double micro_f1(std::span<const Label> predictions, std::span<const Label> golds);

ConfusionMatrix confusion_matrix(std::span<const Label> predictions, std::span<const Label> golds);

std::array<ClassStats, kNumLabels> per_class_stats(const ConfusionMatrix& confusion);

// Lowercase, every non-alphanumeric ASCII byte becomes a separator, split on
// whitespace. Bytes >= 0x80 are kept so UTF-8 words survive intact. No
// stemming, no stopwords.
std::vector<std::string> tokenize_for_rouge(std::string_view text);

// Both texts tokenize to nothing: 1.0. Exactly one empty: 0.0.
RougeScore rouge_n(std::string_view candidate, std::string_view reference, int n);
RougeScore rouge_l(std::string_view candidate, std::string_view reference);

RougeScore rouge_n_tokens(std::span<const std::string> candidate,
                          std::span<const std::string> reference, int n);
RougeScore rouge_l_tokens(std::span<const std::string> candidate,
                          std::span<const std::string> reference);

enum class RougeVariant { Rouge1, Rouge2, RougeL };

// Arithmetic mean of the per-pair scores. Empty input scores 0.
RougeScore aggregate_rouge(std::span<const std::pair<std::string, std::string>> pairs,
                           RougeVariant variant);

double overall_score(double micro_f1, double rouge1_f1);

struct EvaluationReport {
  std::size_t num_records = 0;
  double micro_f1 = 0.0;
  std::array<ClassStats, kNumLabels> per_class{};
  ConfusionMatrix confusion;
  RougeScore rouge1;
  RougeScore rouge2;
  RougeScore rougeL;
  double overall = 0.0;
  std::size_t failed_parses = 0;
  double failed_parse_rate = 0.0;
};

// Pairs predictions with golds by record_id. Every gold must have exactly one
// prediction and every prediction a gold.
EvaluationReport evaluate_run(const std::vector<ParsedPrediction>& parsed,
                              const std::vector<ClaimRecord>& golds);

std::string report_to_json(const EvaluationReport& report, std::string_view run_name = {});
EvaluationReport report_from_json(std::string_view text);

// "| name | Micro F1 | ROUGE-1 | ROUGE-2 | ROUGE-L | Overall Score |" header
// and rows, 4 decimals.
std::string markdown_table_header();
std::string markdown_row(std::string_view name, const EvaluationReport& report);
// Rows sorted by descending overall score; ties keep input order.
std::string markdown_comparison(std::vector<std::pair<std::string, EvaluationReport>> runs);

std::string confusion_to_text(const ConfusionMatrix& confusion);

}  // namespace fmd
