#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kgcoi::text {

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
/// Replaces runs of whitespace with one space and trims the ends.
std::string collapse_whitespace(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Git blob hash (SHA-1 over "blob <size>\0" + content), lowercase hex.
std::string git_blob_hash(std::string_view content);

}  // namespace kgcoi::text
