// Small text helpers shared by the file writers.
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pinlog {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

/// Parses a full string as a double; throws ValidationError otherwise.
double parse_double(std::string_view s);

std::vector<std::string> split_csv_line(std::string_view line);

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary file and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace pinlog
