#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cbi2 {

/// Shortest round-trip-safe text form: "%.17g".
std::string format_double(double x);

/// Strict parse of a whole token; throws ConfigParse on trailing garbage.
double parse_double(std::string_view text);
long long parse_integer(std::string_view text);

std::string_view trim(std::string_view text) noexcept;
std::vector<std::string> split(std::string_view text, char sep);

std::string read_text_file(const std::filesystem::path& path);
/// Writes with "\n" line endings exactly as given; throws Io on failure.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace cbi2
