#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace windgp::csv {

/// Splits one line on commas and trims surrounding whitespace of each field.
/// Quoting is not supported; SCADA exports here are plain numeric tables.
std::vector<std::string_view> split(std::string_view line);

std::string_view trim(std::string_view s);

/// Strict full-field parse; returns false on trailing garbage or empty input.
bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long long& out);

/// Shortest representation that round-trips exactly through parse_double.
std::string format(double value);

/// Opens a file for writing, throwing DataError naming the path on failure.
std::ofstream open_output(const std::filesystem::path& path);

/// Writes one comma-joined row terminated by a newline.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace windgp::csv
