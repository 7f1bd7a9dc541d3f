#include "dynkit/symbolic.hpp"

#include "dynkit/core.hpp"
#include "dynkit/parallel.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>

namespace dynkit {

int SymbolSequence::at(long k) const {
    if (symbols.empty()) throw Error(Err::Usage, "empty symbol sequence");
    if (periodic) return symbols[static_cast<size_t>(k % static_cast<long>(symbols.size()))];
    if (k < 0 || k >= static_cast<long>(symbols.size())) throw Error(Err::Usage, "index outside the window");
    return symbols[static_cast<size_t>(k)];
}

std::string symbols_str(const SymbolSequence& s) {
    std::string out;
    for (size_t i = 0; i < s.symbols.size(); ++i) {
        if (s.origin >= 0 && static_cast<int>(i) == s.origin) out += ',';
        int v = s.symbols[i];
        out += v == 1 ? "+" : v == -1 ? "-" : std::to_string(v);
    }
    if (s.periodic) out = "(" + out + ")^inf";
    return out;
}

Rational tent2(const Rational& x) { return x <= Rational(1, 2) ? Rational(2 * x) : Rational(2 - 2 * x); }

double tent2(double x) { return x <= 0.5 ? 2 * x : 2 - 2 * x; }

SymbolSequence tent_itinerary(const Rational& x0, int n) {
    if (x0 < 0 || x0 > 1) throw Error(Err::Usage, "x must lie in [0, 1]");
    if (n < 0) throw Error(Err::Usage, "length must be nonnegative");
    SymbolSequence s;
    Rational x = x0;
    for (int j = 0; j < n; ++j) {
        s.symbols.push_back(x <= Rational(1, 2) ? 1 : -1);
        x = tent2(x);
    }
    return s;
}

SymbolSequence tent_itinerary(double x, int n) {
    if (!(x >= 0 && x <= 1)) throw Error(Err::Usage, "x must lie in [0, 1]");
    if (n > 60) throw Error(Err::DepthTooLarge, "float itineraries stop at 60 symbols; use a rational x");
    SymbolSequence s;
    for (int j = 0; j < n; ++j) {
        s.symbols.push_back(x <= 0.5 ? 1 : -1);
        x = tent2(x);
    }
    return s;
}

namespace {

// b_j from (-1)^b_j = prod_{i <= j} eps_i.
std::vector<int> binary_digits(const std::vector<int>& eps, size_t n) {
    std::vector<int> b(n);
    int prod = 1;
    for (size_t j = 0; j < n; ++j) {
        int e = eps[j % eps.size()];
        if (e != 1 && e != -1) throw Error(Err::InvalidWord, "itinerary symbols must be +1 or -1");
        prod *= e;
        b[j] = prod == 1 ? 0 : 1;
    }
    return b;
}

}  // namespace

DyadicInterval itinerary_to_point(const SymbolSequence& seq) {
    if (seq.symbols.empty()) return {Rational(0), Rational(1)};
    const size_t p = seq.symbols.size();
    if (seq.periodic) {
        // The digit string repeats with period p or 2p (if the word has an odd
        // number of -1), so x = V / (2^P - 1).
        size_t P = 2 * p;
        auto b = binary_digits(seq.symbols, P);
        BigInt V = 0;
        for (size_t j = 0; j < P; ++j) V = 2 * V + b[j];
        BigInt D = (BigInt(1) << P) - 1;
        Rational x(V, D);
        return {x, x};
    }
    auto b = binary_digits(seq.symbols, p);
    BigInt V = 0;
    for (size_t j = 0; j < p; ++j) V = 2 * V + b[j];
    BigInt D = BigInt(1) << p;
    return {Rational(V, D), Rational(V + 1, D)};
}

namespace {

// Fixed points of g2^p from words of length p, iterated on numerators over
// the common denominator 2^(2p) - 1.
template <class Loop>
std::vector<PeriodicTentPoint> enumerate_impl(int p, Loop loop) {
    if (p < 1 || p > 20) throw Error(Err::Usage, "period must lie in 1..20");
    const int count = 1 << p;
    std::vector<PeriodicTentPoint> out(count);
    const uint64_t D = (uint64_t{1} << (2 * p)) - 1;
    loop(count, [&](int w) {
        PeriodicTentPoint& pt = out[w];
        pt.word.periodic = true;
        for (int j = 0; j < p; ++j) pt.word.symbols.push_back((w >> (p - 1 - j)) & 1 ? -1 : 1);
        auto b = binary_digits(pt.word.symbols, 2 * p);
        uint64_t V = 0;
        for (int j = 0; j < 2 * p; ++j) V = 2 * V + static_cast<uint64_t>(b[j]);
        uint64_t a = V;
        for (int k = 0; k < p; ++k) a = 2 * a <= D ? 2 * a : 2 * D - 2 * a;
        pt.verified = a == V;
        pt.x = Rational(BigInt(V), BigInt(D));
    });
    return out;
}

}  // namespace

std::vector<PeriodicTentPoint> enumerate_periodic_tent(int p) {
    return enumerate_impl(p, [](int n, auto f) { parallel_for(n, f); });
}

std::vector<PeriodicTentPoint> enumerate_periodic_tent_serial(int p) {
    return enumerate_impl(p, [](int n, auto f) { serial_for(n, f); });
}

CantorMembership cantor_membership(const Rational& x, int depth) {
    if (x < 0 || x > 1) throw Error(Err::Usage, "x must lie in [0, 1]");
    if (depth < 1) throw Error(Err::Usage, "depth must be positive");
    CantorMembership m;
    if (x == 1) {
        // 1 = 0.222...
        m.digits.assign(depth, 2);
        m.verdict = CantorVerdict::In;
        m.exact = true;
        return m;
    }
    BigInt num = numerator(x), den = denominator(x);
    std::map<BigInt, size_t> seen;
    std::vector<int> digits;
    bool closed = false;
    while (static_cast<int>(digits.size()) < depth) {
        if (num == 0) {
            closed = true;
            break;
        }
        if (seen.count(num)) {
            closed = true;
            break;
        }
        seen.emplace(num, digits.size());
        num *= 3;
        int d = static_cast<int>(num / den);
        num -= d * den;
        digits.push_back(d);
    }
    if (num == 0) closed = true;
    // A terminating expansion ending in 1 becomes ...0222...
    if (num == 0 && !digits.empty() && digits.back() == 1) {
        digits.back() = 0;
        m.boundary_resolved = true;
        while (static_cast<int>(digits.size()) < depth) digits.push_back(2);
        m.digits = digits;
        bool any_one = false;
        for (int d : m.digits) any_one |= d == 1;
        m.verdict = any_one ? CantorVerdict::Out : CantorVerdict::In;
        m.exact = true;
        return m;
    }
    // Continue a closed expansion periodically (or with zeros) out to depth.
    bool any_one = false;
    for (int d : digits) any_one |= d == 1;
    if (closed && num != 0) {
        size_t start = seen.at(num);
        size_t len = digits.size() - start;
        for (size_t i = 0; static_cast<int>(digits.size()) < depth; ++i) digits.push_back(digits[start + i % len]);
    } else if (closed) {
        while (static_cast<int>(digits.size()) < depth) digits.push_back(0);
    }
    digits.resize(std::min<size_t>(digits.size(), depth));
    m.digits = digits;
    m.exact = closed;
    m.verdict = any_one ? CantorVerdict::Out : CantorVerdict::In;
    return m;
}

std::vector<std::pair<Rational, Rational>> cantor_intervals(int depth) {
    if (depth < 0 || depth > 24) throw Error(Err::DepthTooLarge, "depth must lie in 0..24");
    std::vector<std::pair<Rational, Rational>> iv{{Rational(0), Rational(1)}};
    for (int k = 0; k < depth; ++k) {
        std::vector<std::pair<Rational, Rational>> next;
        next.reserve(2 * iv.size());
        for (const auto& [a, b] : iv) {
            Rational t = (b - a) / 3;
            next.emplace_back(a, a + t);
            next.emplace_back(b - t, b);
        }
        iv = std::move(next);
    }
    return iv;
}

std::vector<double> cantor_endpoints(int depth) {
    std::vector<double> out;
    for (const auto& [a, b] : cantor_intervals(depth)) {
        out.push_back(to_double(a));
        out.push_back(to_double(b));
    }
    return out;
}

double tent_to_logistic(double x) { return 0.5 * (1 - std::cos(std::numbers::pi * x)); }

double logistic_to_tent(double y) { return std::acos(std::clamp(1 - 2 * y, -1.0, 1.0)) / std::numbers::pi; }

double logistic4(double y) { return 4 * y * (1 - y); }

bool Rectangle::contains(const Rectangle& r) const {
    return r.x0 >= x0 && r.y0 >= y0 && r.x0 + r.width <= x0 + width && r.y0 + r.height <= y0 + height;
}

Rectangle horseshoe_rectangle(const std::string& word, const Rational& lambda, const Rational& mu) {
    if (!(lambda > 0 && lambda < Rational(1, 2) && mu > 2))
        throw Error(Err::Usage, "need 0 < lambda < 1/2 and mu > 2");
    auto comma = word.find(',');
    if (comma == std::string::npos || word.find(',', comma + 1) != std::string::npos)
        throw Error(Err::InvalidWord, "word needs exactly one comma");
    auto sym = [](char c) {
        if (c == '+') return 1;
        if (c == '-') return -1;
        throw Error(Err::InvalidWord, std::string("bad symbol '") + c + "'");
    };
    std::string past = word.substr(0, comma), future = word.substr(comma + 1);
    // Vertical extent from the future symbols, innermost last.
    Rational ylo = 0, h = 1;
    for (auto it = future.rbegin(); it != future.rend(); ++it) {
        Rational c = sym(*it) == 1 ? Rational(0) : Rational(1 - 1 / mu);
        ylo = c + ylo / mu;
        h /= mu;
    }
    // Horizontal extent from the past symbols, farthest first.
    Rational xlo = 0, w = 1;
    for (char ch : past) {
        Rational a = sym(ch) == 1 ? Rational(0) : Rational(1 - lambda);
        xlo = a + lambda * xlo;
        w *= lambda;
    }
    return {xlo, ylo, w, h};
}

SymbolSequence shift(const SymbolSequence& s) {
    SymbolSequence out = s;
    if (s.symbols.size() < 2 && !s.periodic) throw Error(Err::Usage, "window too short to shift");
    if (s.periodic) {
        if (!s.symbols.empty()) std::rotate(out.symbols.begin(), out.symbols.begin() + 1, out.symbols.end());
        return out;
    }
    if (s.origin >= 0) {
        if (s.origin + 1 >= static_cast<int>(s.symbols.size())) throw Error(Err::Usage, "origin at window end");
        out.origin = s.origin + 1;
        return out;
    }
    out.symbols.erase(out.symbols.begin());
    return out;
}

double symbol_distance(const SymbolSequence& a, const SymbolSequence& b) {
    if (a.symbols.size() != b.symbols.size() || a.origin != b.origin)
        throw Error(Err::Usage, "windows must share length and origin");
    double d = 0;
    for (size_t i = 0; i < a.symbols.size(); ++i) {
        if (a.symbols[i] == b.symbols[i]) continue;
        long k = a.origin >= 0 ? static_cast<long>(i) - a.origin : static_cast<long>(i) + 1;
        d += std::ldexp(1.0, -static_cast<int>(std::labs(k)));
    }
    return d;
}

}  // namespace dynkit
