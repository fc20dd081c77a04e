#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sqlagents {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& file);
std::string to_jsonl(std::span<const nlohmann::json> records);

std::string read_file(const std::filesystem::path& file);
// Writes to a sibling temp file, then renames over `file`.
void write_file_atomic(const std::filesystem::path& file, std::string_view contents);

}  // namespace sqlagents
