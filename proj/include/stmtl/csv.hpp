#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stmtl::csv {

/// Splits one line on commas. No quoting: none of the project formats need it.
std::vector<std::string> split(std::string_view line);

/// Strict full-string parse; surrounding whitespace is ignored.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Reads all lines, stripping a trailing '\r'. Throws ValidationError if the
/// file cannot be opened.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Writes text atomically enough for our purposes (truncate + write).
void write_text(const std::filesystem::path& path, std::string_view text);

std::string_view trim(std::string_view s);

} // namespace stmtl::csv
