#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdvol/grid.hpp"

namespace sdvol {

/// Fixed 17-significant-digit text, identical on every IEEE-754 platform.
inline std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Column-oriented CSV: `header` names, one curve per column, LF endings.
inline std::string format_csv(const std::vector<std::string>& header, const std::vector<const Curve*>& cols) {
    if (header.size() != cols.size()) throw std::invalid_argument("format_csv: header/column mismatch");
    const std::size_t rows = cols.empty() ? 0 : cols.front()->size();
    for (const Curve* c : cols)
        if (c->size() != rows) throw std::invalid_argument("format_csv: columns differ in length");
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (i) out += ',';
            out += csv_number((*cols[i])[r]);
        }
        out += '\n';
    }
    return out;
}

/// Writes bytes exactly; throws std::runtime_error on failure.
inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace sdvol
