#include "txembed/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "txembed/error.hpp"

namespace txembed::csv {

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::string::npos;
}

namespace {

// Splits one logical record; quoted fields may span physical lines.
bool next_record(std::istream& in, std::size_t& line_no, std::vector<std::string>& out, std::size_t& start_line) {
    out.clear();
    std::string line;
    if (!std::getline(in, line)) return false;
    ++line_no;
    start_line = line_no;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    for (;;) {
        if (i == line.size()) {
            if (quoted) {
                field.push_back('\n');
                if (!std::getline(in, line)) throw ParseError("unterminated quoted field", start_line);
                ++line_no;
                i = 0;
                continue;
            }
            break;
        }
        char c = line[i++];
        if (quoted) {
            if (c == '"') {
                if (i < line.size() && line[i] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c == '\r' && i == line.size()) {
            // tolerate CRLF
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return true;
}

}  // namespace

Table read(std::istream& in) {
    Table t;
    std::size_t line_no = 0, start = 0;
    std::vector<std::string> fields;
    if (!next_record(in, line_no, fields, start)) throw ParseError("missing header row", 1);
    if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);
    t.header = fields;
    while (next_record(in, line_no, fields, start)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != t.header.size())
            throw ParseError("expected " + std::to_string(t.header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             start);
        t.rows.push_back({start, fields});
    }
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        return read(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << escape(fields[i]);
    }
    out << '\n';
}

std::string format_double(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(std::string_view text, std::size_t line) {
    double v = 0;
    auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc{} || r.ptr != text.data() + text.size())
        throw ParseError("not a number: '" + std::string(text) + "'", line);
    return v;
}

long parse_long(std::string_view text, std::size_t line) {
    long v = 0;
    auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc{} || r.ptr != text.data() + text.size())
        throw ParseError("not an integer: '" + std::string(text) + "'", line);
    return v;
}

}  // namespace txembed::csv
