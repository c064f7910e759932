#pragma once

// Whitespace-separated model files: a keyword followed by values, one block
// per line. Doubles are written with 17 significant digits so files round-trip.

#include "matb/core.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace matb::text {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_row(std::ostream& out, std::string_view key, std::span<const double> values) {
    out << key;
    for (double v : values) out << ' ' << format_double(v);
    out << '\n';
}

inline std::string read_word(std::istream& in) {
    std::string w;
    if (!(in >> w)) throw ModelError("unexpected end of model file");
    return w;
}

inline void expect(std::istream& in, std::string_view key) {
    const auto w = read_word(in);
    if (w != key) throw ModelError("expected '" + std::string(key) + "' but found '" + w + "'");
}

inline int read_int(std::istream& in) {
    const auto w = read_word(in);
    try {
        std::size_t pos = 0;
        const int v = std::stoi(w, &pos);
        if (pos != w.size()) throw ModelError("bad integer '" + w + "'");
        return v;
    } catch (const std::logic_error&) {
        throw ModelError("bad integer '" + w + "'");
    }
}

inline double read_double(std::istream& in) {
    const auto w = read_word(in);
    try {
        std::size_t pos = 0;
        const double v = std::stod(w, &pos);
        if (pos != w.size()) throw ModelError("bad number '" + w + "'");
        return v;
    } catch (const std::logic_error&) {
        throw ModelError("bad number '" + w + "'");
    }
}

inline std::vector<double> read_row(std::istream& in, std::string_view key, std::size_t n) {
    expect(in, key);
    std::vector<double> v(n);
    for (auto& x : v) x = read_double(in);
    return v;
}

}  // namespace matb::text
