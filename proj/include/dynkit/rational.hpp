#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>

namespace dynkit {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Always "p/q" with q >= 1, so "3/1" and "0/1" are written as such.
std::string rat_str(const Rational& r);
// "p/q", an integer, or a decimal such as "-0.25", read exactly in base 10.
Rational parse_rational(const std::string& s);

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

// Smallest-denominator continued-fraction convergent that rounds back to x
// exactly, if one exists with denominator <= max_den.
std::optional<Rational> rationalize_strict(double x, long long max_den = 1000000);

// First convergent within tol * max(1, |x|) of x. Callers verify the result
// exactly downstream.
std::optional<Rational> rationalize_near(double x, double tol, long long max_den = 1000000);

// rationalize_strict when possible, otherwise the exact binary value of x.
Rational rationalize(double x);

}  // namespace dynkit
