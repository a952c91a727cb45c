#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ccml {

using Json = nlohmann::json;

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

/// Writes via a sibling temporary and rename, so readers never observe a
/// partially written file and concurrent writers resolve last-writer-wins.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& value);

/// Appends one compact JSON line (JSONL) and flushes.
void append_json_line(const std::filesystem::path& path, const Json& value);

}  // namespace ccml
