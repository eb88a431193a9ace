#pragma once

#include <charconv>
#include <ostream>
#include <string>

namespace fracbsde::csv {

/// Shortest decimal text that round-trips to the same binary64.
inline void put(std::ostream& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
}

/// Fixed count of significant digits.
inline void put(std::ostream& out, double v, int digits) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
    out.write(buf, res.ptr - buf);
}

inline std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace fracbsde::csv
