// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fmd {

std::string_view trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);
bool iequals(std::string_view a, std::string_view b);

// Splits on runs of ASCII whitespace; never yields empty tokens.
std::vector<std::string_view> split_whitespace(std::string_view text);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// UTC, second precision, e.g. "2025-01-31T12:00:00Z".
std::string utc_timestamp_now();

}  // namespace fmd
