#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "gridfase/csv.hpp"
#include "gridfase/errors.hpp"

namespace gridfase::csv {

std::string num(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    // Prefer the shorter %.12g form when it reproduces the value exactly.
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.12g", value);
    if (std::strtod(shorter, nullptr) == value) return shorter;
    return buf;
}

Writer::Writer(const std::filesystem::path& path, std::string_view header) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    out_ << header << '\n';
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ParseError("missing CSV column '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open");
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        auto fields = split(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) throw ParseError(path.string() + ": empty CSV file");
    return t;
}

double to_double(const std::string& text, const std::filesystem::path& path, std::size_t line) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
        throw ParseError(path.string() + ":" + std::to_string(line) + ": not a number '" + text + "'");
    }
    return v;
}

}  // namespace gridfase::csv
