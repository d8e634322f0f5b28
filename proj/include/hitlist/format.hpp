#pragma once

// Byte-stable number rendering for reports: integer-exact percentages and
// rationals, fixed-precision doubles.

#include <cstdint>
#include <cstdio>
#include <string>

#include <boost/rational.hpp>

namespace hitlist {

using Rational = boost::rational<std::int64_t>;

namespace detail {

// value/den rounded half-up to two decimals, computed in integers
inline std::string two_decimals(unsigned __int128 num, unsigned __int128 den) {
    if (den == 0) return "0.00";
    const unsigned __int128 hundredths = (num * 200 + den) / (2 * den);
    const auto whole = static_cast<unsigned long long>(hundredths / 100);
    const auto frac = static_cast<unsigned long long>(hundredths % 100);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%llu.%02llu", whole, frac);
    return buf;
}

} // namespace detail

/// 100 * part / whole with two decimals ("43.32"); "0.00" when whole is 0.
inline std::string format_pct(std::uint64_t part, std::uint64_t whole) {
    return detail::two_decimals(static_cast<unsigned __int128>(part) * 100, whole);
}

/// Non-negative rational with two decimals.
inline std::string format_rational(const Rational& r) {
    if (r < 0) return "-" + format_rational(-r);
    return detail::two_decimals(static_cast<unsigned __int128>(r.numerator()),
                                static_cast<unsigned __int128>(r.denominator()));
}

/// "num/den" form for exact round-tripping.
inline std::string exact_rational(const Rational& r) {
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace hitlist
