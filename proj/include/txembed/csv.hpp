#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace txembed::csv {

struct Row {
    std::size_t line;  // 1-based line number in the source
    std::vector<std::string> fields;
};

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// Index of `name` in the header, or npos.
    std::size_t column(std::string_view name) const;
};

/// Reads comma-separated text with optional RFC 4180 quoting. Blank lines are
/// skipped. Every row must have as many fields as the header.
Table read(std::istream& in);
Table read_file(const std::string& path);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);
double parse_double(std::string_view text, std::size_t line);
long parse_long(std::string_view text, std::size_t line);

}  // namespace txembed::csv
