// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "fmd/metrics.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace fmd;

namespace {

using Tokens = std::vector<std::string>;

Tokens random_tokens(std::mt19937_64& rng, std::size_t max_len, std::size_t alphabet) {
  Tokens out(rng() % (max_len + 1));
  for (auto& t : out) t = std::string(1, static_cast<char>('a' + rng() % alphabet));
  return out;
}

std::vector<Label> random_labels(std::mt19937_64& rng, std::size_t n) {
  std::vector<Label> out(n);
  for (auto& l : out) l = kAllLabels[rng() % kNumLabels];
  return out;
}

ParsedPrediction prediction(const std::string& id, Label label, const std::string& explanation,
                            ParseStatus status = ParseStatus::Clean) {
  ParsedPrediction p;
  p.record_id = id;
  p.label = label;
  p.explanation = explanation;
  p.status = status;
  return p;
}

ClaimRecord gold(const std::string& id, Label label, const std::string& explanation) {
  ClaimRecord r;
  r.id = id;
  r.claim = "claim " + id;
  r.label = label;
  r.explanation = explanation;
  return r;
}

}  // namespace

TEST_CASE("micro F1 on a small fixture") {
  std::vector<Label> golds = {Label::True, Label::True, Label::False, Label::NEI};
  std::vector<Label> preds = {Label::True, Label::False, Label::False, Label::NEI};
  CHECK(micro_f1(preds, golds) == doctest::Approx(0.75).epsilon(1e-15));

  ConfusionMatrix cm = confusion_matrix(preds, golds);
  CHECK(cm.counts[0][0] == 1);
  CHECK(cm.counts[1][1] == 1);
  CHECK(cm.counts[1][0] == 1);
  CHECK(cm.counts[2][2] == 1);
  CHECK(cm.total() == 4);
  CHECK(cm.row_sum(Label::True) == 2);
  CHECK(cm.column_sum(Label::False) == 2);

  auto stats = per_class_stats(cm);
  CHECK(stats[0].precision == doctest::Approx(0.5));
  CHECK(stats[0].recall == doctest::Approx(1.0));
  CHECK(stats[1].precision == doctest::Approx(1.0));
  CHECK(stats[1].recall == doctest::Approx(0.5));
  CHECK(stats[1].support == 2);

  CHECK_THROWS_AS(micro_f1({}, {}), MetricError);
  std::vector<Label> shorter = {Label::True};
  CHECK_THROWS_AS(micro_f1(shorter, golds), MetricError);
}

TEST_CASE("micro F1 equals accuracy") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 1 + rng() % 80;
    auto golds = random_labels(rng, n);
    auto preds = random_labels(rng, n);
    CHECK(std::abs(micro_f1(preds, golds) - oracle::accuracy(preds, golds)) <= 1e-12);

    ConfusionMatrix cm = confusion_matrix(preds, golds);
    CHECK(cm.total() == n);
    for (Label c : kAllLabels) {
      CHECK(cm.row_sum(c) == static_cast<std::size_t>(std::count(golds.begin(), golds.end(), c)));
      CHECK(cm.column_sum(c) == static_cast<std::size_t>(std::count(preds.begin(), preds.end(), c)));
    }
  }
}

TEST_CASE("rouge tokenization") {
  CHECK(tokenize_for_rouge("The U.S. economy!") == Tokens{"the", "u", "s", "economy"});
  CHECK(tokenize_for_rouge("  GDP-growth,\t3.5%\n") == Tokens{"gdp", "growth", "3", "5"});
  CHECK(tokenize_for_rouge("").empty());
  CHECK(tokenize_for_rouge("?!.").empty());
  CHECK(tokenize_for_rouge("Café déjà") == Tokens{"caf\xc3\xa9", "d\xc3\xa9j\xc3\xa0"});
}

TEST_CASE("rouge worked examples") {
  RougeScore r1 = rouge_n("the cat sat", "the cat ate", 1);
  CHECK(r1.precision == doctest::Approx(2.0 / 3));
  CHECK(r1.recall == doctest::Approx(2.0 / 3));
  CHECK(r1.f1 == doctest::Approx(2.0 / 3));

  RougeScore r2 = rouge_n("the cat sat", "the cat ate", 2);
  CHECK(r2.precision == doctest::Approx(0.5));
  CHECK(r2.f1 == doctest::Approx(0.5));

  RougeScore rl = rouge_l("a b c d", "a c b d");
  CHECK(rl.precision == doctest::Approx(0.75));
  CHECK(rl.recall == doctest::Approx(0.75));
  CHECK(rl.f1 == doctest::Approx(0.75));

  // Repeated tokens are clipped by the reference count.
  RougeScore clipped = rouge_n("the the the", "the cat", 1);
  CHECK(clipped.precision == doctest::Approx(1.0 / 3));
  CHECK(clipped.recall == doctest::Approx(0.5));

  CHECK(rouge_n("", "", 1).f1 == 1.0);
  CHECK(rouge_l("...", "").f1 == 1.0);
  CHECK(rouge_n("word", "", 1).f1 == 0.0);
  CHECK(rouge_l("", "word").f1 == 0.0);
  // One token has no bigrams.
  CHECK(rouge_n("word", "word", 2).f1 == 0.0);
  CHECK_THROWS_AS(rouge_n("a", "a", 0), MetricError);
  CHECK(f_measure(0, 0) == 0.0);
}

TEST_CASE("rouge matches brute-force oracles") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 400; ++trial) {
    Tokens cand = random_tokens(rng, 10, 5);
    Tokens ref = random_tokens(rng, 10, 5);
    for (int n : {1, 2}) {
      RougeScore got = rouge_n_tokens(cand, ref, n);
      oracle::RougeCounts want = oracle::rouge_n(cand, ref, static_cast<std::size_t>(n));
      CHECK(std::abs(got.f1 - want.f1()) <= 1e-12);
      if (!want.both_empty && !want.one_empty) {
        CHECK(std::abs(got.precision - want.precision.value()) <= 1e-12);
        CHECK(std::abs(got.recall - want.recall.value()) <= 1e-12);
      }
    }
    RougeScore got = rouge_l_tokens(cand, ref);
    oracle::RougeCounts want = oracle::rouge_l(cand, ref);
    CHECK(std::abs(got.f1 - want.f1()) <= 1e-12);
    if (!want.both_empty && !want.one_empty) {
      CHECK(std::abs(got.precision - want.precision.value()) <= 1e-12);
      CHECK(std::abs(got.recall - want.recall.value()) <= 1e-12);
    }
  }
}

TEST_CASE("rouge properties") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    Tokens a = random_tokens(rng, 12, 4);
    Tokens b = random_tokens(rng, 12, 4);
    for (int n : {1, 2}) {
      RougeScore ab = rouge_n_tokens(a, b, n);
      RougeScore ba = rouge_n_tokens(b, a, n);
      CHECK(ab.f1 == doctest::Approx(ba.f1));
      CHECK(ab.precision == doctest::Approx(ba.recall));
      CHECK(ab.f1 >= 0.0);
      CHECK(ab.f1 <= 1.0);
    }
    RougeScore l = rouge_l_tokens(a, b);
    CHECK(l.f1 == doctest::Approx(rouge_l_tokens(b, a).f1));
    CHECK(l.f1 >= 0.0);
    CHECK(l.f1 <= 1.0);
    if (!a.empty()) {
      CHECK(rouge_n_tokens(a, a, 1).f1 == 1.0);
      CHECK(rouge_l_tokens(a, a).f1 == 1.0);
    }
    // Every common unigram bounds the LCS from above.
    CHECK(l.f1 <= rouge_n_tokens(a, b, 1).f1 + 1e-12);
  }
}

TEST_CASE("corpus rouge is the mean of per-pair scores") {
  std::vector<std::pair<std::string, std::string>> pairs = {
      {"the cat sat", "the cat ate"}, {"a b c d", "a c b d"}, {"", "nothing"}};
  RougeScore r1 = aggregate_rouge(pairs, RougeVariant::Rouge1);
  CHECK(r1.f1 == doctest::Approx((2.0 / 3 + 1.0 + 0.0) / 3));
  RougeScore rl = aggregate_rouge(pairs, RougeVariant::RougeL);
  CHECK(rl.f1 == doctest::Approx((2.0 / 3 + 0.75 + 0.0) / 3));
  CHECK(rl.precision == doctest::Approx((2.0 / 3 + 0.75 + 0.0) / 3));
  CHECK(aggregate_rouge({}, RougeVariant::Rouge2).f1 == 0.0);
}

TEST_CASE("overall score") {
  // Published rows: (micro F1, ROUGE-1) -> overall.
  CHECK(std::abs(overall_score(0.8322, 0.6710) - 0.7516) <= 0.00005);
  CHECK(std::abs(overall_score(0.8283, 0.7253) - 0.7768) <= 0.00005);
  CHECK(overall_score(1.0, 1.0) == 1.0);
  CHECK(overall_score(0.0, 0.0) == 0.0);
  CHECK(overall_score(0.5, 0.25) == 0.375);
  CHECK_THROWS_AS(overall_score(1.1, 0.5), MetricError);
  CHECK_THROWS_AS(overall_score(0.5, -0.01), MetricError);
  CHECK_THROWS_AS(overall_score(std::nan(""), 0.5), MetricError);
}

TEST_CASE("evaluate_run on a perfect run") {
  auto corpus = testing::synthetic_corpus(30, 3);
  std::vector<ParsedPrediction> preds;
  // Reverse order: pairing is by id.
  for (auto it = corpus.rbegin(); it != corpus.rend(); ++it) {
    preds.push_back(prediction(it->id, *it->label, it->explanation));
  }
  EvaluationReport report = evaluate_run(preds, corpus);
  CHECK(report.num_records == 30);
  CHECK(report.micro_f1 == 1.0);
  CHECK(report.rouge1.f1 == 1.0);
  CHECK(report.rouge2.f1 == 1.0);
  CHECK(report.rougeL.f1 == 1.0);
  CHECK(report.overall == 1.0);
  CHECK(report.failed_parses == 0);
  CHECK(report.confusion.total() == 30);
}

TEST_CASE("evaluate_run matches the oracles") {
  const std::vector<std::string> words = {"rev", "tax", "debt", "rose", "fell", "the"};
  std::mt19937_64 rng(10);
  std::vector<ClaimRecord> golds;
  std::vector<ParsedPrediction> preds;
  std::vector<Label> gl, pl;
  double r1_sum = 0, r2_sum = 0, rl_sum = 0;
  std::size_t failed = 0;
  for (int i = 0; i < 10; ++i) {
    auto make_text = [&] {
      std::string s;
      std::size_t n = 1 + rng() % 7;
      for (std::size_t k = 0; k < n; ++k) s += (k ? " " : "") + words[rng() % words.size()];
      return s;
    };
    std::string ref = make_text();
    std::string cand = make_text();
    Label g = kAllLabels[rng() % 3];
    Label p = kAllLabels[rng() % 3];
    ParseStatus status = i % 4 == 0 ? ParseStatus::Failed : ParseStatus::Clean;
    if (status == ParseStatus::Failed) {
      cand.clear();
      p = Label::NEI;
      ++failed;
    }
    golds.push_back(gold("g" + std::to_string(i), g, ref));
    preds.push_back(prediction("g" + std::to_string(i), p, cand, status));
    gl.push_back(g);
    pl.push_back(p);
    Tokens ct = tokenize_for_rouge(cand), rt = tokenize_for_rouge(ref);
    r1_sum += oracle::rouge_n(ct, rt, 1).f1();
    r2_sum += oracle::rouge_n(ct, rt, 2).f1();
    rl_sum += oracle::rouge_l(ct, rt).f1();
  }
  EvaluationReport report = evaluate_run(preds, golds);
  CHECK(std::abs(report.micro_f1 - oracle::accuracy(pl, gl)) <= 1e-12);
  CHECK(std::abs(report.rouge1.f1 - r1_sum / 10) <= 1e-12);
  CHECK(std::abs(report.rouge2.f1 - r2_sum / 10) <= 1e-12);
  CHECK(std::abs(report.rougeL.f1 - rl_sum / 10) <= 1e-12);
  CHECK(std::abs(report.overall - (report.micro_f1 + report.rouge1.f1) / 2) <= 1e-15);
  CHECK(report.failed_parses == failed);
  CHECK(report.failed_parse_rate == doctest::Approx(failed / 10.0));
}

TEST_CASE("evaluate_run rejects mismatched id sets") {
  std::vector<ClaimRecord> golds = {gold("a", Label::True, "x"), gold("b", Label::False, "y")};
  CHECK_THROWS_WITH_AS(evaluate_run({prediction("a", Label::True, "x")}, golds),
                       doctest::Contains("'b'"), MetricError);
  CHECK_THROWS_WITH_AS(evaluate_run({prediction("a", Label::True, "x"),
                                     prediction("a", Label::True, "x"),
                                     prediction("b", Label::True, "x")},
                                    golds),
                       doctest::Contains("duplicate"), MetricError);
  CHECK_THROWS_WITH_AS(evaluate_run({prediction("a", Label::True, "x"),
                                     prediction("b", Label::True, "x"),
                                     prediction("c", Label::True, "x")},
                                    golds),
                       doctest::Contains("'c'"), MetricError);
  golds[1].label.reset();
  CHECK_THROWS_AS(evaluate_run({prediction("a", Label::True, "x"), prediction("b", Label::True, "x")},
                               golds),
                  MetricError);
}

TEST_CASE("report json and markdown") {
  std::vector<ClaimRecord> golds = {gold("a", Label::True, "the cat sat"),
                                    gold("b", Label::False, "a b c d"),
                                    gold("c", Label::NEI, "nothing here")};
  std::vector<ParsedPrediction> preds = {prediction("a", Label::True, "the cat ate"),
                                         prediction("b", Label::NEI, "a c b d"),
                                         prediction("c", Label::NEI, "", ParseStatus::Failed)};
  EvaluationReport report = evaluate_run(preds, golds);
  std::string json = report_to_json(report, "demo");
  CHECK(json.find("\"report_version\"") != std::string::npos);
  EvaluationReport back = report_from_json(json);
  CHECK(back.num_records == report.num_records);
  CHECK(back.micro_f1 == report.micro_f1);
  CHECK(back.confusion == report.confusion);
  CHECK(back.rouge1.f1 == report.rouge1.f1);
  CHECK(back.rouge2.precision == report.rouge2.precision);
  CHECK(back.rougeL.recall == report.rougeL.recall);
  CHECK(back.overall == report.overall);
  CHECK(back.failed_parses == 1);
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    CHECK(back.per_class[k].f1 == report.per_class[k].f1);
    CHECK(back.per_class[k].support == report.per_class[k].support);
  }
  CHECK_THROWS_AS(report_from_json("{\"report_version\": 99}"), MetricError);
  CHECK_THROWS_AS(report_from_json("not json"), MetricError);

  CHECK(markdown_table_header().starts_with(
      "| Model | Micro F1 | ROUGE-1 | ROUGE-2 | ROUGE-L | Overall Score |"));
  EvaluationReport fixed;
  fixed.micro_f1 = 0.8366;
  fixed.rouge1.f1 = 0.7170;
  fixed.rouge2.f1 = 0.6639;
  fixed.rougeL.f1 = 0.6772;
  fixed.overall = 0.7768;
  CHECK(markdown_row("SeQwen", fixed) ==
        "| SeQwen | 0.8366 | 0.7170 | 0.6639 | 0.6772 | 0.7768 |\n");

  EvaluationReport low = fixed;
  low.overall = 0.5;
  std::string table = markdown_comparison({{"low", low}, {"high", fixed}, {"low2", low}});
  auto high_at = table.find("| high ");
  auto low_at = table.find("| low ");
  auto low2_at = table.find("| low2 ");
  CHECK(high_at < low_at);
  CHECK(low_at < low2_at);
  CHECK(confusion_to_text(report.confusion).find("NEI") != std::string::npos);
}
