#pragma once

// Comma-separated tables with a header row. Fields may be double-quoted;
// quoted fields cannot span lines.

#include <greenexp/error.hpp>

#include <boost/tokenizer.hpp>
#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace greenexp::io {

struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines; // 1-based file line of each row

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw IngestError(source + ": missing column '" + std::string(name) + "'", {});
    }

    bool has_column(std::string_view name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    using Sep = boost::escaped_list_separator<char>;
    boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
    std::vector<std::string> out;
    for (auto it = tok.begin(); it != tok.end(); ++it) out.push_back(*it);
    return out;
}

inline CsvTable parse_csv(std::istream& in, std::string source) {
    CsvTable t;
    t.source = std::move(source);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (line.empty()) continue;
        std::vector<std::string> fields;
        try {
            fields = split_csv_line(line);
        } catch (const boost::escaped_list_error& e) {
            throw IngestError(t.source + ": malformed line " + std::to_string(lineno) + ": " + e.what(), {lineno});
        }
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw IngestError(t.source + ": line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                                  " fields, expected " + std::to_string(t.header.size()),
                              {lineno});
        }
        t.rows.push_back(std::move(fields));
        t.lines.push_back(lineno);
    }
    if (!have_header) throw IngestError(t.source + ": empty file", {});
    return t;
}

inline CsvTable parse_csv(std::string_view text, std::string source = "<memory>") {
    std::istringstream in{std::string(text)};
    return parse_csv(in, std::move(source));
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    return parse_csv(in, path.string());
}

inline double parse_number(std::string_view field, const CsvTable& t, std::size_t row, std::string_view column) {
    double v = 0.0;
    const char* b = field.data();
    const char* e = b + field.size();
    while (b < e && *b == ' ') ++b;
    while (e > b && e[-1] == ' ') --e;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || !std::isfinite(v)) {
        throw IngestError(t.source + ": line " + std::to_string(t.lines[row]) + ": column '" + std::string(column) +
                              "' is not a number: '" + std::string(field) + "'",
                          {t.lines[row]});
    }
    return v;
}

inline double number_at(const CsvTable& t, std::size_t row, std::string_view column) {
    return parse_number(t.rows[row][t.column(column)], t, row, column);
}

inline std::string quote_csv(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '\\';
        out += c;
    }
    return out + '"';
}

// Shortest text that round-trips the double; missing values are empty fields.
inline std::string format_number(double v) { return fmt::format("{}", v); }

inline std::string format_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) { row(header); }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) text_ += ',';
            text_ += quote_csv(fields[i]);
        }
        text_ += '\n';
    }

    const std::string& str() const { return text_; }

private:
    std::string text_;
};

} // namespace greenexp::io
