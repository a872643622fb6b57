// SPDX-License-Identifier: Apache-2.0
#include "fmd/dataset.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "fmd/util.hpp"

namespace fmd {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kColumns[] = {"id", "claim", "justification", "explanation", "label",
                                         "sector"};

struct SectorName {
  std::string_view name;
  Sector sector;
};

constexpr SectorName kSectors[] = {
    {"Income", Sector::Income}, {"Profit & Loss", Sector::ProfitAndLoss},
    {"Economy", Sector::Economy}, {"Budget", Sector::Budget},
    {"Taxes", Sector::Taxes},   {"Debt", Sector::Debt},
    {"Other", Sector::Other},
};

[[noreturn]] void row_error(std::string_view source, std::size_t row, std::string_view field,
                            const std::string& message) {
  throw DataError(std::string(source) + ": row " + std::to_string(row) + ", field '" +
                  std::string(field) + "': " + message);
}

// Label cells accept the prompt codec plus the class-table code "0".
std::optional<Label> parse_label_cell(std::string_view text, std::string_view source,
                                      std::size_t row) {
  std::string_view cell = trim(text);
  if (cell.empty()) return std::nullopt;
  if (cell == "0") return Label::False;
  if (auto label = decode_label(cell)) return label;
  row_error(source, row, "label",
            "unknown label token '" + std::string(cell) + "'; accepted tokens: " +
                accepted_label_tokens() + ", \"0\"");
}

bool parse_bool_cell(std::string_view text, std::string_view source, std::size_t row) {
  std::string value = to_lower_ascii(trim(text));
  if (value.empty() || value == "false" || value == "0") return false;
  if (value == "true" || value == "1") return true;
  row_error(source, row, "is_augmented", "expected true/false, got '" + value + "'");
}

struct RawRow {
  std::map<std::string, std::string, std::less<>> cells;
  std::optional<Label> json_label;  // integer label from json, already decoded
  bool json_label_set = false;
  std::optional<bool> json_augmented;
};

ClaimRecord build_record(const RawRow& raw, std::string_view source, std::size_t row) {
  auto cell = [&](std::string_view key) -> std::string {
    auto it = raw.cells.find(key);
    return it == raw.cells.end() ? std::string() : it->second;
  };

  ClaimRecord record;
  record.id = std::string(trim(cell("id")));
  if (record.id.empty()) row_error(source, row, "id", "missing or empty id");
  record.claim = cell("claim");
  if (trim(record.claim).empty()) row_error(source, row, "claim", "claim is empty");
  record.justification = cell("justification");
  record.explanation = cell("explanation");
  record.label = raw.json_label_set ? raw.json_label : parse_label_cell(cell("label"), source, row);
  record.sector = parse_sector(cell("sector"));
  record.is_augmented = raw.json_augmented ? *raw.json_augmented
                                           : parse_bool_cell(cell("is_augmented"), source, row);
  record.parent_id = std::string(trim(cell("parent_id")));
  if (record.is_augmented && record.parent_id.empty()) {
    row_error(source, row, "parent_id", "augmented record without parent_id");
  }
  if (!record.is_augmented && !record.parent_id.empty()) {
    row_error(source, row, "parent_id", "parent_id set on a non-augmented record");
  }
  return record;
}

// RFC 4180 records: quoted fields may hold separators, quotes ("") and
// newlines. Returns rows of cells; fully empty lines are dropped.
std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text,
                                                     std::string_view source) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  std::size_t line = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_quoted = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_quoted) {
          throw DataError(std::string(source) + ": line " + std::to_string(line) +
                          ": stray quote inside unquoted field");
        }
        in_quotes = true;
        field_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        ++line;
        end_row();
        break;
      default:
        field.push_back(c);
    }
  }
  if (in_quotes) {
    throw DataError(std::string(source) + ": unterminated quoted field at end of file");
  }
  if (!field.empty() || !row.empty() || field_quoted) end_row();
  return rows;
}

std::vector<RawRow> read_csv(std::string_view text, std::string_view source) {
  auto rows = parse_csv_rows(text, source);
  std::vector<RawRow> out;
  if (rows.empty()) return out;

  std::vector<std::string> header;
  for (const auto& name : rows.front()) header.push_back(to_lower_ascii(trim(name)));
  for (std::string_view required : {"id", "claim"}) {
    if (std::find(header.begin(), header.end(), required) == header.end()) {
      throw DataError(std::string(source) + ": header lacks required column '" +
                      std::string(required) + "'");
    }
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      row_error(source, r, header.size() < rows[r].size() ? "<extra>" : header[rows[r].size()],
                "expected " + std::to_string(header.size()) + " fields, found " +
                    std::to_string(rows[r].size()));
    }
    RawRow raw;
    for (std::size_t c = 0; c < header.size(); ++c) raw.cells[header[c]] = rows[r][c];
    out.push_back(std::move(raw));
  }
  return out;
}

std::vector<RawRow> read_jsonl(std::string_view text, std::string_view source) {
  std::vector<RawRow> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty()) continue;

    Json object;
    try {
      object = Json::parse(line);
    } catch (const Json::parse_error& e) {
      row_error(source, line_no, "<json>", e.what());
    }
    if (!object.is_object()) row_error(source, line_no, "<json>", "line is not a json object");

    RawRow raw;
    for (const auto& [key, value] : object.items()) {
      if (value.is_null()) continue;
      if (key == "label" && value.is_number_integer()) {
        raw.json_label = label_from_code(value.get<int>());
        if (!raw.json_label) {
          row_error(source, line_no, "label",
                    "integer label must be 0 (False), 1 (True) or 2 (NEI), got " + value.dump());
        }
        raw.json_label_set = true;
      } else if (key == "is_augmented" && value.is_boolean()) {
        raw.json_augmented = value.get<bool>();
      } else if (value.is_string()) {
        raw.cells[key] = value.get<std::string>();
      } else if (key == "id" && value.is_number_integer()) {
        raw.cells[key] = value.dump();
      } else if (std::find(std::begin(kColumns), std::end(kColumns), key) != std::end(kColumns) ||
                 key == "is_augmented" || key == "parent_id") {
        row_error(source, line_no, key, "unexpected value type " + std::string(value.type_name()));
      }
    }
    out.push_back(std::move(raw));
  }
  return out;
}

std::string csv_quote(std::string_view value) {
  bool needs_quotes = value.find_first_of(",\"\r\n") != std::string_view::npos ||
                      (!value.empty() && (value.front() == ' ' || value.back() == ' '));
  if (!needs_quotes) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Unbiased draw from [0, bound) using only the engine's raw output, which the
// standard fixes bit-for-bit (unlike the distributions and std::shuffle).
std::uint64_t bounded(std::mt19937_64& engine, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do {
    draw = engine();
  } while (draw >= limit);
  return draw % bound;
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(bounded(engine, i));
    std::swap(items[i - 1], items[j]);
  }
}

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string_view sector_name(Sector sector) {
  for (const auto& entry : kSectors) {
    if (entry.sector == sector) return entry.name;
  }
  return "Other";
}

std::optional<Sector> parse_sector(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  for (const auto& entry : kSectors) {
    if (iequals(entry.name, text)) return entry.sector;
  }
  if (iequals(text, "profit and loss") || iequals(text, "profit_and_loss")) {
    return Sector::ProfitAndLoss;
  }
  return Sector::Other;
}

DataFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = to_lower_ascii(path.extension().string());
  if (ext == ".csv") return DataFormat::Csv;
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return DataFormat::JsonLines;
  throw DataError("cannot infer dataset format from '" + path.string() +
                  "' (expected .csv or .jsonl)");
}

std::vector<ClaimRecord> parse_dataset(std::string_view text, DataFormat format,
                                       std::string_view source) {
  std::vector<RawRow> rows =
      format == DataFormat::Csv ? read_csv(text, source) : read_jsonl(text, source);

  std::vector<ClaimRecord> records;
  records.reserve(rows.size());
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ClaimRecord record = build_record(rows[i], source, i + 1);
    if (!seen.insert(record.id).second) {
      row_error(source, i + 1, "id", "duplicate id '" + record.id + "'");
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<ClaimRecord> load_dataset(const std::filesystem::path& path, DataFormat format) {
  if (!std::filesystem::exists(path)) throw DataError("no such file: '" + path.string() + "'");
  return parse_dataset(read_file(path), format, path.string());
}

std::vector<ClaimRecord> load_dataset(const std::filesystem::path& path) {
  return load_dataset(path, format_from_path(path));
}

std::string serialize_dataset(const std::vector<ClaimRecord>& records, DataFormat format) {
  std::string out;
  if (format == DataFormat::JsonLines) {
    for (const ClaimRecord& r : records) {
      Json object;
      object["id"] = r.id;
      object["claim"] = r.claim;
      object["justification"] = r.justification;
      object["explanation"] = r.explanation;
      object["label"] = r.label ? Json(std::string(encode_label(*r.label))) : Json(nullptr);
      object["sector"] = r.sector ? Json(std::string(sector_name(*r.sector))) : Json(nullptr);
      if (r.is_augmented) {
        object["is_augmented"] = true;
        object["parent_id"] = r.parent_id;
      }
      out += object.dump(-1, ' ', false, Json::error_handler_t::replace);
      out.push_back('\n');
    }
    return out;
  }

  bool any_augmented =
      std::any_of(records.begin(), records.end(), [](const auto& r) { return r.is_augmented; });
  out = "id,claim,justification,explanation,label,sector";
  if (any_augmented) out += ",is_augmented,parent_id";
  out += "\n";
  for (const ClaimRecord& r : records) {
    out += csv_quote(r.id) + ',' + csv_quote(r.claim) + ',' + csv_quote(r.justification) + ',' +
           csv_quote(r.explanation) + ',' +
           (r.label ? std::string(encode_label(*r.label)) : std::string()) + ',' +
           (r.sector ? csv_quote(sector_name(*r.sector)) : std::string());
    if (any_augmented) {
      out += std::string(",") + (r.is_augmented ? "true" : "false") + ',' + csv_quote(r.parent_id);
    }
    out += "\n";
  }
  return out;
}

void save_dataset(const std::vector<ClaimRecord>& records, const std::filesystem::path& path,
                  DataFormat format) {
  write_file(path, serialize_dataset(records, format));
}

ClassCounts apportion_dev_counts(const ClassCounts& class_totals, std::size_t dev_count) {
  const std::size_t total = std::accumulate(class_totals.begin(), class_totals.end(), std::size_t{0});
  ClassCounts quota{};
  if (total == 0) return quota;

  std::array<std::size_t, kNumLabels> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    // Exact integer arithmetic: quota = floor(n_c * dev / N), remainder kept
    // as the numerator of the fractional part.
    quota[c] = class_totals[c] * dev_count / total;
    remainder[c] = class_totals[c] * dev_count % total;
    assigned += quota[c];
  }
  std::array<std::size_t, kNumLabels> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < dev_count && k < kNumLabels; ++k, ++assigned) {
    ++quota[order[k]];
  }
  return quota;
}

DatasetSplit split_train_dev(const std::vector<ClaimRecord>& records, std::size_t dev_count,
                             std::uint64_t seed, const SplitOptions& options) {
  if (dev_count >= records.size()) {
    throw DataError("dev_count (" + std::to_string(dev_count) +
                    ") must be smaller than the number of records (" +
                    std::to_string(records.size()) + ")");
  }

  std::array<std::vector<std::size_t>, kNumLabels> members;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].label) {
      throw DataError("cannot split: record '" + records[i].id + "' has no label");
    }
    members[label_index(*records[i].label)].push_back(i);
  }

  ClassCounts totals{};
  for (std::size_t c = 0; c < kNumLabels; ++c) totals[c] = members[c].size();

  ClassCounts quota;
  if (options.dev_quota) {
    quota = *options.dev_quota;
    std::size_t sum = std::accumulate(quota.begin(), quota.end(), std::size_t{0});
    if (sum != dev_count) {
      throw DataError("dev quota sums to " + std::to_string(sum) + ", expected dev_count " +
                      std::to_string(dev_count));
    }
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      if (quota[c] > totals[c]) {
        throw DataError("dev quota for class " +
                        std::string(label_display_name(kAllLabels[c])) + " (" +
                        std::to_string(quota[c]) + ") exceeds its " + std::to_string(totals[c]) +
                        " records");
      }
    }
  } else {
    quota = apportion_dev_counts(totals, dev_count);
  }

  std::vector<bool> in_dev(records.size(), false);
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    std::vector<std::size_t> shuffled = members[c];
    seeded_shuffle(shuffled, splitmix64(seed ^ splitmix64(c + 1)));
    for (std::size_t k = 0; k < quota[c]; ++k) in_dev[shuffled[k]] = true;
  }

  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (in_dev[i] ? split.dev : split.train).push_back(records[i]);
  }
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    split.dev_counts[c] = quota[c];
    split.train_counts[c] = totals[c] - quota[c];
  }
  return split;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_terminal(text[i]) && i + 1 < text.size() && is_space(text[i + 1])) {
      std::string_view sentence = trim(text.substr(start, i + 1 - start));
      if (!sentence.empty()) sentences.emplace_back(sentence);
      start = i + 1;
    }
  }
  std::string_view tail = trim(text.substr(std::min(start, text.size())));
  if (!tail.empty()) sentences.emplace_back(tail);
  return sentences;
}

std::vector<ClaimRecord> augment_with_justification_claims(const std::vector<ClaimRecord>& records,
                                                           std::size_t min_tokens) {
  std::vector<ClaimRecord> out = records;
  if (min_tokens == kAugmentDisabled) return out;

  std::unordered_set<std::string> ids;
  for (const auto& r : records) ids.insert(r.id);

  for (const ClaimRecord& parent : records) {
    std::size_t k = 0;
    for (std::string& sentence : split_sentences(parent.justification)) {
      if (split_whitespace(sentence).size() < min_tokens) continue;
      ClaimRecord child;
      child.id = parent.id + "#aug" + std::to_string(++k);
      while (!ids.insert(child.id).second) child.id += "_";
      child.claim = std::move(sentence);
      child.explanation = parent.explanation;
      child.label = parent.label;
      child.sector = parent.sector;
      child.is_augmented = true;
      child.parent_id = parent.id;
      out.push_back(std::move(child));
    }
  }
  return out;
}

ClassCounts class_distribution(const std::vector<ClaimRecord>& records) {
  ClassCounts counts{};
  for (const ClaimRecord& r : records) {
    if (!r.label) throw DataError("record '" + r.id + "' has no label");
    ++counts[label_index(*r.label)];
  }
  return counts;
}

}  // namespace fmd
