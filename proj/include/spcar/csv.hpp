#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spcar::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<long> line_numbers;  // 1-based source line of each row
};

/// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_line(std::string_view line, long line_number);

/// Reads a whole file; blank lines are skipped. Every row must have the
/// header's width.
Table read_file(const std::filesystem::path& path);

/// Reads and checks the header equals `expected` exactly (after trimming).
Table read_file(const std::filesystem::path& path, const std::vector<std::string>& expected);

bool is_missing(std::string_view cell);

std::optional<double> parse_optional_real(std::string_view cell, long line, std::string_view field);
double parse_real(std::string_view cell, long line, std::string_view field);

/// Shortest representation that round-trips exactly.
std::string format_real(double value);
std::string format_optional(const std::optional<double>& value);

std::string trim(std::string_view s);

}  // namespace spcar::csv
