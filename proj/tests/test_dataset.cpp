// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fmd/dataset.hpp"
#include "fmd/util.hpp"
#include "synthetic.hpp"

using namespace fmd;

namespace {

std::vector<ClaimRecord> labeled(const ClassCounts& per_class) {
  return testing::synthetic_corpus(per_class, 7);
}

}  // namespace

TEST_CASE("label codes follow the class table") {
  CHECK(label_index(Label::False) == 0);
  CHECK(label_index(Label::True) == 1);
  CHECK(label_index(Label::NEI) == 2);
  CHECK(label_from_code(2) == Label::NEI);
  CHECK_FALSE(label_from_code(3).has_value());
}

TEST_CASE("load jsonl keeps file order and normalizes label tokens") {
  std::string text =
      R"({"id":"a","claim":"Taxes rose.","justification":"","explanation":"e","label":"not_enough_info","sector":"Taxes"})"
      "\n"
      R"({"id":"b","claim":"Debt fell.","label":"TRUE"})"
      "\n\n"
      R"({"id":"c","claim":"Budget grew.","label":0,"sector":"Healthcare"})"
      "\n"
      R"({"id":"d","claim":"Income flat."})"
      "\n";
  auto records = parse_dataset(text, DataFormat::JsonLines);
  REQUIRE(records.size() == 4);
  CHECK(records[0].id == "a");
  CHECK(records[0].label == Label::NEI);
  CHECK(records[0].sector == Sector::Taxes);
  CHECK(records[1].label == Label::True);
  CHECK(records[2].label == Label::False);
  CHECK(records[2].sector == Sector::Other);
  CHECK_FALSE(records[3].label.has_value());
  CHECK_FALSE(records[3].sector.has_value());
}

TEST_CASE("load csv handles quoting, embedded newlines and header order") {
  std::string text =
      "label,id,claim,justification,explanation,sector\r\n"
      "false,x1,\"Revenue, they say, doubled.\",\"Line one.\nLine two.\",\"He said \"\"no\"\".\",Profit & Loss\r\n"
      "2,x2,  Spaces kept  ,,,\r\n";
  auto records = parse_dataset(text, DataFormat::Csv);
  REQUIRE(records.size() == 2);
  CHECK(records[0].claim == "Revenue, they say, doubled.");
  CHECK(records[0].justification == "Line one.\nLine two.");
  CHECK(records[0].explanation == "He said \"no\".");
  CHECK(records[0].label == Label::False);
  CHECK(records[0].sector == Sector::ProfitAndLoss);
  CHECK(records[1].claim == "  Spaces kept  ");
  CHECK(records[1].label == Label::NEI);
}

TEST_CASE("empty files load as empty datasets") {
  CHECK(parse_dataset("", DataFormat::JsonLines).empty());
  CHECK(parse_dataset("", DataFormat::Csv).empty());
  CHECK(parse_dataset("id,claim,label\n", DataFormat::Csv).empty());
}

TEST_CASE("load errors name the row and the field") {
  auto message = [](std::string_view text, DataFormat format) {
    try {
      parse_dataset(text, format, "f");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };

  SUBCASE("unknown label lists accepted tokens") {
    auto m = message("id,claim,label\na,ok,maybe\n", DataFormat::Csv);
    CHECK(m.find("row 1") != std::string::npos);
    CHECK(m.find("'label'") != std::string::npos);
    CHECK(m.find("not_enough_info") != std::string::npos);
  }
  SUBCASE("empty claim") {
    auto m = message(R"({"id":"a","claim":"ok"})" "\n" R"({"id":"b","claim":"   "})",
                     DataFormat::JsonLines);
    CHECK(m.find("row 2") != std::string::npos);
    CHECK(m.find("'claim'") != std::string::npos);
  }
  SUBCASE("duplicate id") {
    auto m = message("id,claim\na,x\na,y\n", DataFormat::Csv);
    CHECK(m.find("duplicate id 'a'") != std::string::npos);
    CHECK(m.find("row 2") != std::string::npos);
  }
  SUBCASE("wrong field count") {
    auto m = message("id,claim,label\na,x\n", DataFormat::Csv);
    CHECK(m.find("row 1") != std::string::npos);
    CHECK(m.find("'label'") != std::string::npos);
  }
  SUBCASE("malformed json") {
    auto m = message("{\"id\": \"a\", \"claim\": ", DataFormat::JsonLines);
    CHECK(m.find("row 1") != std::string::npos);
  }
  SUBCASE("augmented without parent") {
    auto m = message(R"({"id":"a","claim":"x","is_augmented":true})", DataFormat::JsonLines);
    CHECK(m.find("'parent_id'") != std::string::npos);
  }
  SUBCASE("missing id column") {
    auto m = message("claim,label\nx,true\n", DataFormat::Csv);
    CHECK(m.find("'id'") != std::string::npos);
  }
}

TEST_CASE("every accepted label token decodes through the loader") {
  const std::pair<std::string, Label> cases[] = {
      {"true", Label::True},       {"false", Label::False},
      {"not_enough_info", Label::NEI}, {"NEI", Label::NEI},
      {"Not Enough Info", Label::NEI}, {"not_enough_information", Label::NEI},
      {"1", Label::True},          {"2", Label::NEI},
      {"3", Label::False},         {"0", Label::False}};
  for (const auto& [token, expected] : cases) {
    auto records = parse_dataset("id,claim,label\na,x," + token + "\n", DataFormat::Csv);
    CHECK_MESSAGE(records[0].label == expected, token);
  }
}

TEST_CASE("serialize then load is the identity in both formats") {
  auto records = testing::synthetic_corpus(60, 3);
  records[4].justification = "";
  records[5].label.reset();
  records[6].claim = "Quotes \"inside\", commas, and\nnewlines";
  records = augment_with_justification_claims(records, 4);
  REQUIRE(std::any_of(records.begin(), records.end(), [](auto& r) { return r.is_augmented; }));

  for (DataFormat format : {DataFormat::JsonLines, DataFormat::Csv}) {
    std::string once = serialize_dataset(records, format);
    auto loaded = parse_dataset(once, format);
    CHECK(loaded == records);
    CHECK(serialize_dataset(loaded, format) == once);
  }
}

TEST_CASE("save and load through files picks the format from the extension") {
  auto dir = testing::temp_dir("dataset_io");
  auto records = testing::synthetic_corpus(10, 1);
  save_dataset(records, dir / "x.csv", DataFormat::Csv);
  save_dataset(records, dir / "x.jsonl", DataFormat::JsonLines);
  CHECK(load_dataset(dir / "x.csv") == records);
  CHECK(load_dataset(dir / "x.jsonl") == records);
  CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), DataError);
  CHECK_THROWS_AS(format_from_path("data.txt"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("largest-remainder apportionment") {
  // 50/30/20 of 100 with 10 dev: exact quotas 5, 3, 2.
  CHECK(apportion_dev_counts({50, 30, 20}, 10) == ClassCounts{5, 3, 2});
  // 10 * (1/3 each) = 3.33: one leftover goes to the lowest code on a tie.
  CHECK(apportion_dev_counts({1, 1, 1}, 2) == ClassCounts{1, 1, 0});
  CHECK(apportion_dev_counts({3, 3, 3}, 0) == ClassCounts{0, 0, 0});
  // The published class totals (892, 717, 344) with 453 dev records:
  // 892*453/1953 = 206.90, 717*453/1953 = 166.31, 344*453/1953 = 79.79.
  CHECK(apportion_dev_counts({892, 717, 344}, 453) == ClassCounts{207, 166, 80});
}

TEST_CASE("split_train_dev") {
  SUBCASE("synthetic 50/30/20 split with 10 dev records") {
    auto records = labeled({50, 30, 20});
    auto split = split_train_dev(records, 10, 11);
    CHECK(split.dev_counts == ClassCounts{5, 3, 2});
    CHECK(class_distribution(split.dev) == ClassCounts{5, 3, 2});
    CHECK(class_distribution(split.train) == ClassCounts{45, 27, 18});
  }
  SUBCASE("dev_count 0 keeps everything in train") {
    auto records = labeled({5, 5, 5});
    auto split = split_train_dev(records, 0, 1);
    CHECK(split.dev.empty());
    CHECK(split.train == records);
  }
  SUBCASE("published class totals with an explicit per-class quota") {
    auto records = labeled({892, 717, 344});
    SplitOptions options;
    options.dev_quota = ClassCounts{196, 175, 82};
    auto split = split_train_dev(records, 453, 2024, options);
    CHECK(class_distribution(split.train) == ClassCounts{696, 542, 262});
    CHECK(class_distribution(split.dev) == ClassCounts{196, 175, 82});
    CHECK(split.train.size() == 1500);
  }
  SUBCASE("published class totals with the default apportionment") {
    auto records = labeled({892, 717, 344});
    auto split = split_train_dev(records, 453, 2024);
    CHECK(class_distribution(split.dev) == ClassCounts{207, 166, 80});
  }
  SUBCASE("errors") {
    auto records = labeled({2, 2, 2});
    CHECK_THROWS_AS(split_train_dev(records, 6, 0), DataError);
    CHECK_THROWS_AS(split_train_dev(records, 7, 0), DataError);
    SplitOptions bad_sum;
    bad_sum.dev_quota = ClassCounts{1, 1, 0};
    CHECK_THROWS_AS(split_train_dev(records, 3, 0, bad_sum), DataError);
    SplitOptions too_many;
    too_many.dev_quota = ClassCounts{3, 0, 0};
    CHECK_THROWS_AS(split_train_dev(records, 3, 0, too_many), DataError);
    records[3].label.reset();
    CHECK_THROWS_AS(split_train_dev(records, 1, 0), DataError);
  }
}

TEST_CASE("split properties over random inputs") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    ClassCounts per_class{rng() % 40, rng() % 40, rng() % 40};
    std::size_t total = per_class[0] + per_class[1] + per_class[2];
    if (total < 2) continue;
    auto records = testing::synthetic_corpus(per_class, rng());
    std::size_t dev_count = rng() % total;
    std::uint64_t seed = rng();

    auto split = split_train_dev(records, dev_count, seed);
    auto again = split_train_dev(records, dev_count, seed);
    CHECK(split.train == again.train);
    CHECK(split.dev == again.dev);

    // Disjoint, union equals input, order preserved.
    std::set<std::string> train_ids, dev_ids;
    for (auto& r : split.train) train_ids.insert(r.id);
    for (auto& r : split.dev) dev_ids.insert(r.id);
    CHECK(train_ids.size() == split.train.size());
    CHECK(dev_ids.size() == dev_count);
    for (auto& id : dev_ids) CHECK_FALSE(train_ids.contains(id));
    CHECK(train_ids.size() + dev_ids.size() == total);
    CHECK(std::is_sorted(split.train.begin(), split.train.end(), [&](auto& a, auto& b) {
      return std::stoul(a.id.substr(1)) < std::stoul(b.id.substr(1));
    }));

    auto train_counts = class_distribution(split.train);
    auto dev_counts = class_distribution(split.dev);
    CHECK(train_counts == split.train_counts);
    CHECK(dev_counts == split.dev_counts);

    // Stratification: every class's dev share within one record of exact.
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      double exact = static_cast<double>(per_class[c]) * static_cast<double>(dev_count) /
                     static_cast<double>(total);
      CHECK(std::abs(static_cast<double>(dev_counts[c]) - exact) < 1.0);
    }
  }
}

TEST_CASE("split is pinned across platforms") {
  // Frozen from the first run; mt19937_64 output and our bounded draw are
  // fully specified, so any change here means the split changed.
  auto records = testing::synthetic_corpus(12, 5);
  auto split = split_train_dev(records, 4, 123);
  std::vector<std::string> dev_ids;
  for (auto& r : split.dev) dev_ids.push_back(r.id);
  CHECK(dev_ids == std::vector<std::string>{"c0", "c6", "c10", "c11"});
}

TEST_CASE("sentence splitting") {
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("One. Two! Three? Four") ==
        std::vector<std::string>{"One.", "Two!", "Three?", "Four"});
  CHECK(split_sentences("Rate was 2.5 percent. Fine.") ==
        std::vector<std::string>{"Rate was 2.5 percent.", "Fine."});
  CHECK(split_sentences("  Trailing space.  ") == std::vector<std::string>{"Trailing space."});
}

TEST_CASE("augment_with_justification_claims") {
  ClaimRecord parent;
  parent.id = "p";
  parent.claim = "Revenue doubled.";
  parent.justification =
      "Revenue rose by ten percent last year. Analysts expected a far smaller increase overall! "
      "Short one.";
  parent.explanation = "Filings show a ten percent rise.";
  parent.label = Label::False;
  parent.sector = Sector::Income;

  ClaimRecord plain;
  plain.id = "q";
  plain.claim = "Debt fell.";
  plain.label = Label::True;

  SUBCASE("two qualifying sentences become two records after the originals") {
    auto out = augment_with_justification_claims({parent, plain}, 5);
    REQUIRE(out.size() == 4);
    CHECK(out[0] == parent);
    CHECK(out[1] == plain);
    CHECK(out[2].id == "p#aug1");
    CHECK(out[2].claim == "Revenue rose by ten percent last year.");
    CHECK(out[3].id == "p#aug2");
    CHECK(out[3].claim == "Analysts expected a far smaller increase overall!");
    for (std::size_t i : {2u, 3u}) {
      CHECK(out[i].label == Label::False);
      CHECK(out[i].explanation == parent.explanation);
      CHECK(out[i].justification.empty());
      CHECK(out[i].is_augmented);
      CHECK(out[i].parent_id == "p");
    }
  }
  SUBCASE("empty justification yields nothing") {
    CHECK(augment_with_justification_claims({plain}, 5) == std::vector<ClaimRecord>{plain});
  }
  SUBCASE("disabled") {
    CHECK(augment_with_justification_claims({parent, plain}, kAugmentDisabled) ==
          std::vector<ClaimRecord>{parent, plain});
  }
  SUBCASE("threshold counts whitespace tokens") {
    CHECK(augment_with_justification_claims({parent}, 8).size() == 1);
    CHECK(augment_with_justification_claims({parent}, 7).size() == 3);
    CHECK(augment_with_justification_claims({parent}, 1).size() == 4);
  }
  SUBCASE("colliding ids get a suffix") {
    ClaimRecord clash = plain;
    clash.id = "p#aug1";
    auto out = augment_with_justification_claims({parent, clash}, 5);
    CHECK(out[2].id == "p#aug1_");
  }
}

TEST_CASE("augmentation is monotone and filterable") {
  auto records = testing::synthetic_corpus(90, 17);
  for (std::size_t min_tokens : {0u, 3u, 6u, 20u}) {
    auto out = augment_with_justification_claims(records, min_tokens);
    CHECK(out.size() >= records.size());
    std::vector<ClaimRecord> originals;
    std::copy_if(out.begin(), out.end(), std::back_inserter(originals),
                 [](auto& r) { return !r.is_augmented; });
    CHECK(originals == records);
  }
}

TEST_CASE("class_distribution") {
  CHECK(class_distribution({}) == ClassCounts{0, 0, 0});
  auto records = labeled({4, 2, 1});
  auto counts = class_distribution(records);
  CHECK(counts == ClassCounts{4, 2, 1});
  records[0].label.reset();
  CHECK_THROWS_AS(class_distribution(records), DataError);
}

TEST_CASE("sector names") {
  CHECK(parse_sector("profit & loss") == Sector::ProfitAndLoss);
  CHECK(parse_sector("Crypto") == Sector::Other);
  CHECK_FALSE(parse_sector("  ").has_value());
  CHECK(sector_name(Sector::Debt) == "Debt");
}
