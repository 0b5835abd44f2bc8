#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace csiloc::io {

/// Shortest decimal text that parses back to exactly `value` ('.' separator,
/// locale independent).
std::string format_double(double value);

/// `value` with `digits` significant digits.
std::string format_significant(double value, int digits);

/// Parses a full field as a double. Returns false on trailing garbage.
bool parse_double(std::string_view text, double& out);

std::vector<std::string_view> split(std::string_view line, char delimiter);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace csiloc::io
