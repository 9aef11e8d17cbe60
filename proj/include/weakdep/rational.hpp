#pragma once

#include "weakdep/error.hpp"

#include <boost/rational.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace weakdep {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

inline std::string to_string(const Rational& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline Rational rmax(const Rational& a, const Rational& b) { return a < b ? b : a; }
inline Rational rmin(const Rational& a, const Rational& b) { return a < b ? a : b; }

/// Best rational approximation with denominator <= max_den (continued fractions).
/// Decimal inputs such as 0.75 or 2.5 are recovered exactly.
inline Rational rational_from_double(double x, std::int64_t max_den = 1'000'000) {
    require(std::isfinite(x), "rational_from_double: non-finite value");
    const bool negative = x < 0;
    double v = std::fabs(x);
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    for (int iter = 0; iter < 64; ++iter) {
        const double a_d = std::floor(v);
        if (a_d > 9.0e15) break;
        const auto a = static_cast<std::int64_t>(a_d);
        const std::int64_t q2 = q0 + a * q1;
        if (q2 > max_den) break;
        const std::int64_t p2 = p0 + a * p1;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        const double frac = v - a_d;
        if (frac < 1e-12) break;
        v = 1.0 / frac;
    }
    if (q1 == 0) { p1 = static_cast<std::int64_t>(std::llround(std::fabs(x))); q1 = 1; }
    return Rational(negative ? -p1 : p1, q1);
}

/// Parses "3/4", "-2", or a decimal literal ("0.75").
inline Rational parse_rational(std::string_view text) {
    const auto slash = text.find('/');
    try {
        if (slash == std::string_view::npos) {
            const std::string s(text);
            if (s.find_first_of(".eE") == std::string::npos) return Rational(std::stoll(s));
            return rational_from_double(std::stod(s));
        }
        const std::int64_t num = std::stoll(std::string(text.substr(0, slash)));
        const std::int64_t den = std::stoll(std::string(text.substr(slash + 1)));
        require(den != 0, "parse_rational: zero denominator");
        return Rational(num, den);
    } catch (const std::logic_error&) {
        throw SpecError("parse_rational: cannot parse '" + std::string(text) + "'");
    }
}

}  // namespace weakdep
