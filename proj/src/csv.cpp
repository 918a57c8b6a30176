#include "spcar/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "spcar/error.hpp"

namespace spcar::csv {

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(std::string_view line, long line_number) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", line_number);
    out.push_back(trim(field));
    return out;
}

Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Table table;
    std::string line;
    long line_number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        auto fields = split_line(line, line_number);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ParseError(fmt::format("expected {} fields, found {}", table.header.size(), fields.size()),
                             line_number);
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_number);
    }
    if (!have_header) throw ParseError("missing header", 1);
    return table;
}

Table read_file(const std::filesystem::path& path, const std::vector<std::string>& expected) {
    Table table = read_file(path);
    if (table.header != expected) {
        throw ParseError(fmt::format("header mismatch: expected '{}', found '{}'", fmt::join(expected, ","),
                                     fmt::join(table.header, ",")),
                         1);
    }
    return table;
}

bool is_missing(std::string_view cell) {
    while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.front()))) cell.remove_prefix(1);
    while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.remove_suffix(1);
    if (cell.empty()) return true;
    return cell.size() == 2 && std::toupper(static_cast<unsigned char>(cell[0])) == 'N' &&
           std::toupper(static_cast<unsigned char>(cell[1])) == 'A';
}

double parse_real(std::string_view cell, long line, std::string_view field) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    if (!cell.empty() && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw ParseError(fmt::format("field '{}': cannot parse '{}' as a real number", field, cell), line);
    }
    return value;
}

std::optional<double> parse_optional_real(std::string_view cell, long line, std::string_view field) {
    if (is_missing(cell)) return std::nullopt;
    return parse_real(cell, line, field);
}

std::string format_real(double value) { return fmt::format("{}", value); }

std::string format_optional(const std::optional<double>& value) {
    return value ? format_real(*value) : std::string("NA");
}

}  // namespace spcar::csv
