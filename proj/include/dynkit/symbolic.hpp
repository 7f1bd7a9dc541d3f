#pragma once

#include "dynkit/core.hpp"
#include "dynkit/rational.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace dynkit {

// Symbols are +1/-1 for itineraries and horseshoe words, 0/2 for ternary
// Cantor digits. `origin` marks the index of symbol 0 in a two-sided window
// and is -1 for one-sided sequences. A periodic sequence stores one period.
struct SymbolSequence {
    std::vector<int> symbols;
    int origin = -1;
    bool periodic = false;

    int period() const { return periodic ? static_cast<int>(symbols.size()) : 0; }
    // Symbol k of the infinite sequence (one-sided, periodic).
    int at(long k) const;
};

std::string symbols_str(const SymbolSequence& s);

// Tent map g2 on [0, 1] with the tie x = 1/2 sent to +1.
Rational tent2(const Rational& x);
double tent2(double x);

// epsilon_j = +1 iff g2^(j-1)(x) <= 1/2, computed exactly.
SymbolSequence tent_itinerary(const Rational& x, int n);
// Binary iteration in doubles; n is capped at 60.
SymbolSequence tent_itinerary(double x, int n);

struct DyadicInterval {
    Rational lo, hi;
};

// Periodic sequences give the exact point, finite ones the closed dyadic
// interval of all compatible x (lo == hi for the periodic case).
DyadicInterval itinerary_to_point(const SymbolSequence& seq);

struct PeriodicTentPoint {
    SymbolSequence word;
    Rational x;
    bool verified = false;  // g2^p(x) == x exactly
};

std::vector<PeriodicTentPoint> enumerate_periodic_tent(int p);
std::vector<PeriodicTentPoint> enumerate_periodic_tent_serial(int p);

enum class CantorVerdict { In, Out };

struct CantorMembership {
    CantorVerdict verdict = CantorVerdict::Out;
    std::vector<int> digits;        // canonical ternary digits, up to depth
    bool exact = false;             // expansion closed (terminated or cycled) within depth
    bool boundary_resolved = false;  // a terminating ...1 was rewritten to ...02222
};

CantorMembership cantor_membership(const Rational& x, int depth);

// Closed intervals left after `depth` middle-third removals.
std::vector<std::pair<Rational, Rational>> cantor_intervals(int depth);
// Both endpoints of every interval, sorted.
std::vector<double> cantor_endpoints(int depth);

// h(x) = (1 - cos(pi x)) / 2 carries g2 to the logistic map f4.
double tent_to_logistic(double x);
double logistic_to_tent(double y);
double logistic4(double y);

// Linear horseshoe: T maps H+ = [0,1] x [0,1/mu] onto V+ = [0,lambda] x [0,1]
// and H- = [0,1] x [1-1/mu,1] onto V- = [1-lambda,1] x [0,1], both
// orientation preserving.
struct Rectangle {
    Rational x0, y0;  // lower-left corner
    Rational width, height;
    bool contains(const Rectangle& r) const;
};

// Word "e_-m...e_-1,e_0...e_n" over {+,-}. Width lambda^m, height
// mu^-(n+1); an empty side spans the full unit interval.
Rectangle horseshoe_rectangle(const std::string& word, const Rational& lambda, const Rational& mu);

// Two-sided: moves the origin one place right. One-sided: drops the head.
SymbolSequence shift(const SymbolSequence& s);

// sum over the window of (1 - delta) 2^-|i|, i counted from the origin
// (from 1 for one-sided sequences).
double symbol_distance(const SymbolSequence& a, const SymbolSequence& b);

}  // namespace dynkit
