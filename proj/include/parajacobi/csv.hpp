#pragma once

#include <cstdio>
#include <initializer_list>
#include <ostream>
#include <string>

namespace parajacobi {

// 17 significant digits round-trips any double; '%g' is locale-independent for '.' under the C locale.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(std::ostream& os, std::initializer_list<const char*> header) : os_(os) {
        bool first = true;
        for (const char* h : header) {
            os_ << (first ? "" : ",") << h;
            first = false;
        }
        os_ << '\n';
    }

    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((os_ << (first ? "" : ",") << cell(cells), first = false), ...);
        os_ << '\n';
        ++rows_;
    }

    std::size_t rows() const { return rows_; }

private:
    static std::string cell(double v) { return fmt17(v); }
    static std::string cell(long long v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }

    std::ostream& os_;
    std::size_t rows_ = 0;
};

} // namespace parajacobi
