#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace gridfase::csv {

/// Shortest text that round-trips a double; fixed across runs so outputs are byte-stable.
std::string num(double value);

class Writer {
public:
    Writer(const std::filesystem::path& path, std::string_view header);

    template <typename... Fields>
    void row(const Fields&... fields) {
        bool first = true;
        ((out_ << (first ? "" : ",") << text(fields), first = false), ...);
        out_ << '\n';
    }

private:
    static std::string text(double v) { return num(v); }
    static std::string text(int v) { return std::to_string(v); }
    static std::string text(long v) { return std::to_string(v); }
    static std::string text(long long v) { return std::to_string(v); }
    static std::string text(std::size_t v) { return std::to_string(v); }
    static std::string text(char v) { return std::string(1, v); }
    static std::string text(std::string_view v) { return std::string(v); }
    static std::string text(const std::string& v) { return v; }
    static std::string text(const char* v) { return v; }

    std::ofstream out_;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws ParseError when missing.
    std::size_t column(std::string_view name) const;
};

/// Reads a comma-separated file with a header line. Throws ParseError on ragged rows.
Table read(const std::filesystem::path& path);

double to_double(const std::string& text, const std::filesystem::path& path, std::size_t line);

}  // namespace gridfase::csv
