// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmd/label.hpp"

namespace fmd {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Sector : std::uint8_t { Income, ProfitAndLoss, Economy, Budget, Taxes, Debt, Other };

std::string_view sector_name(Sector sector);
// Empty text means "no sector"; unrecognized names map to Sector::Other.
std::optional<Sector> parse_sector(std::string_view text);

struct ClaimRecord {
  std::string id;
  std::string claim;
  std::string justification;
  std::string explanation;
  std::optional<Label> label;
  std::optional<Sector> sector;
  bool is_augmented = false;
  std::string parent_id;  // set iff is_augmented

  bool operator==(const ClaimRecord&) const = default;
};

using ClassCounts = std::array<std::size_t, kNumLabels>;

struct DatasetSplit {
  std::vector<ClaimRecord> train;
  std::vector<ClaimRecord> dev;
  std::uint64_t seed = 0;
  ClassCounts train_counts{};
  ClassCounts dev_counts{};
};

enum class DataFormat { Csv, JsonLines };

// Picks the format from the extension: ".csv" or ".jsonl"/".json"/".ndjson".
DataFormat format_from_path(const std::filesystem::path& path);

// Rows are validated and kept in file order. Errors name the 1-based data row
// (header excluded for csv) and the offending field.
std::vector<ClaimRecord> load_dataset(const std::filesystem::path& path, DataFormat format);
std::vector<ClaimRecord> load_dataset(const std::filesystem::path& path);

// Parses an in-memory document; `source` is only used in error messages.
std::vector<ClaimRecord> parse_dataset(std::string_view text, DataFormat format,
                                       std::string_view source = "<memory>");

std::string serialize_dataset(const std::vector<ClaimRecord>& records, DataFormat format);
void save_dataset(const std::vector<ClaimRecord>& records, const std::filesystem::path& path,
                  DataFormat format);

struct SplitOptions {
  // Explicit per-class dev counts indexed by label code. When unset the
  // counts are the largest-remainder apportionment of dev_count.
  std::optional<ClassCounts> dev_quota;
};

// Per-class dev counts by largest-remainder apportionment. Ties on the
// remainder go to the lower label code.
ClassCounts apportion_dev_counts(const ClassCounts& class_totals, std::size_t dev_count);

// Stratified split. Within each class the dev members are the first quota
// entries of a seeded Fisher-Yates shuffle; both outputs keep input order.
DatasetSplit split_train_dev(const std::vector<ClaimRecord>& records, std::size_t dev_count,
                             std::uint64_t seed, const SplitOptions& options = {});

inline constexpr std::size_t kAugmentDisabled = std::numeric_limits<std::size_t>::max();
inline constexpr std::size_t kDefaultAugmentMinTokens = 5;

// Sentences split on [.!?] followed by whitespace (or end of text).
std::vector<std::string> split_sentences(std::string_view text);

// Appends one record per justification sentence with at least min_tokens
// whitespace tokens, after all originals. Augmented ids are
// "<parent>#aug<k>" with k counted per parent from 1.
std::vector<ClaimRecord> augment_with_justification_claims(const std::vector<ClaimRecord>& records,
                                                           std::size_t min_tokens);

ClassCounts class_distribution(const std::vector<ClaimRecord>& records);

}  // namespace fmd
