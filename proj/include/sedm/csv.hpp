#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sedm/error.hpp"

namespace sedm {

/// Minimal CSV support: comma separator, double-quote escaping.
namespace csv {

inline std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

inline std::vector<std::string> parse_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw DecodeError("CSV column not found: " + name);
    }
};

inline Table read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open CSV: " + path);
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = parse_line(line);
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != t.header.size())
                throw DecodeError("CSV row width mismatch in " + path);
            t.rows.push_back(std::move(fields));
        }
    }
    if (first) throw NoData("empty CSV: " + path);
    return t;
}

class Writer {
public:
    explicit Writer(const std::string& path) : os_(path) {
        if (!os_) throw IoError("cannot open for writing: " + path);
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) os_ << ',';
            os_ << escape(fields[i]);
        }
        os_ << '\n';
    }

    std::ofstream& stream() { return os_; }

private:
    std::ofstream os_;
};

} // namespace csv

/// Fixed-format float printing with enough digits to round-trip f64.
inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace sedm
