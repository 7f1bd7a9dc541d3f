#include "dynkit/poly.hpp"
#include "dynkit/ratlinalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dynkit {

std::string rat_str(const Rational& r) {
    return numerator(r).str() + "/" + denominator(r).str();
}

namespace {

// Strict base 10; cpp_int alone would take a leading 0 as octal and 0x as hex.
BigInt parse_decimal_int(std::string t, const std::string& whole) {
    bool neg = false;
    if (!t.empty() && (t[0] == '-' || t[0] == '+')) {
        neg = t[0] == '-';
        t.erase(0, 1);
    }
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
        throw Error(Err::Usage, "'" + whole + "' is not a rational number");
    t.erase(0, std::min(t.find_first_not_of('0'), t.size() - 1));
    BigInt v(t);
    return neg ? BigInt(-v) : v;
}

}  // namespace

Rational parse_rational(const std::string& s) {
    auto slash = s.find('/');
    if (slash != std::string::npos) {
        BigInt q = parse_decimal_int(s.substr(slash + 1), s);
        if (q == 0) throw Error(Err::Usage, "'" + s + "' has a zero denominator");
        return Rational(parse_decimal_int(s.substr(0, slash), s), q);
    }
    auto dot = s.find('.');
    if (dot == std::string::npos) return Rational(parse_decimal_int(s, s));
    std::string frac = s.substr(dot + 1);
    if (frac.empty() || frac.find_first_not_of("0123456789") != std::string::npos)
        throw Error(Err::Usage, "'" + s + "' is not a rational number");
    std::string head = s.substr(0, dot);
    if (head.empty() || head == "-" || head == "+") head += "0";
    Rational r(parse_decimal_int(head + frac, s), pow(BigInt(10), static_cast<unsigned>(frac.size())));
    return r;
}

std::optional<Rational> rationalize_strict(double x, long long max_den) { return rationalize_near(x, 0.0, max_den); }

std::optional<Rational> rationalize_near(double x, double tol, long long max_den) {
    if (!std::isfinite(x)) return std::nullopt;
    const double slack = tol * std::max(1.0, std::abs(x));
    // Convergents h/k of the continued fraction of x, computed in floating
    // point; each candidate is checked by exact round trip.
    double r = x;
    long long h0 = 1, h1 = static_cast<long long>(std::floor(r));
    long long k0 = 0, k1 = 1;
    for (int it = 0; it < 64; ++it) {
        if (std::abs(static_cast<double>(h1) / static_cast<double>(k1) - x) <= slack) return Rational(h1, k1);
        double frac = r - std::floor(r);
        if (frac == 0.0) break;
        r = 1.0 / frac;
        if (r > 1e12) break;
        long long a = static_cast<long long>(std::floor(r));
        long long h2 = a * h1 + h0, k2 = a * k1 + k0;
        if (k2 > max_den || std::llabs(h2) > (1LL << 52)) break;
        h0 = h1; h1 = h2;
        k0 = k1; k1 = k2;
    }
    return std::nullopt;
}

Rational rationalize(double x) {
    if (auto r = rationalize_strict(x)) return *r;
    int e = 0;
    double m = std::frexp(x, &e);
    auto mant = static_cast<long long>(std::ldexp(m, 53));
    e -= 53;
    Rational out(mant);
    if (e >= 0) out *= Rational(BigInt(1) << e);
    else out /= Rational(BigInt(1) << (-e));
    return out;
}

int mi_degree(const MultiIndex& a) {
    int d = 0;
    for (int v : a) d += v;
    return d;
}

std::vector<MultiIndex> monomials_of_degree(int n, int k) {
    std::vector<MultiIndex> out;
    MultiIndex cur(n, 0);
    std::function<void(int, int)> rec = [&](int i, int left) {
        if (i == n - 1) {
            cur[i] = left;
            out.push_back(cur);
            return;
        }
        for (int v = left; v >= 0; --v) {
            cur[i] = v;
            rec(i + 1, left - v);
        }
    };
    if (n == 0) return out;
    rec(0, k);
    return out;
}

TaylorMap<double> to_double_map(const TaylorMap<Rational>& m) {
    return convert_map<double>(m, [](const Rational& r) { return to_double(r); });
}

TaylorMap<cplx> to_complex_map(const TaylorMap<double>& m) {
    return convert_map<cplx>(m, [](double v) { return cplx(v, 0.0); });
}

}  // namespace dynkit

namespace dynkit {

RMat rat_identity(int n) {
    RMat I(n, RVec(n, Rational(0)));
    for (int i = 0; i < n; ++i) I[i][i] = 1;
    return I;
}

RMat rat_mul(const RMat& a, const RMat& b) {
    const size_t n = a.size(), m = b.empty() ? 0 : b[0].size(), k = b.size();
    RMat c(n, RVec(m, Rational(0)));
    for (size_t i = 0; i < n; ++i)
        for (size_t l = 0; l < k; ++l) {
            if (a[i][l] == 0) continue;
            for (size_t j = 0; j < m; ++j) c[i][j] += a[i][l] * b[l][j];
        }
    return c;
}

std::optional<RVec> rat_solve(RMat M, RVec b) {
    const int n = static_cast<int>(M.size());
    for (int c = 0; c < n; ++c) {
        int piv = -1;
        for (int r = c; r < n; ++r)
            if (M[r][c] != 0) {
                piv = r;
                break;
            }
        if (piv < 0) return std::nullopt;
        std::swap(M[c], M[piv]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < n; ++r) {
            if (M[r][c] == 0) continue;
            Rational f = M[r][c] / M[c][c];
            for (int j = c; j < n; ++j) M[r][j] -= f * M[c][j];
            b[r] -= f * b[c];
        }
    }
    RVec x(n);
    for (int r = n - 1; r >= 0; --r) {
        Rational s = b[r];
        for (int j = r + 1; j < n; ++j) s -= M[r][j] * x[j];
        x[r] = s / M[r][r];
    }
    return x;
}

std::optional<RMat> rat_inverse(const RMat& M) {
    const int n = static_cast<int>(M.size());
    RMat inv(n, RVec(n));
    for (int j = 0; j < n; ++j) {
        RVec e(n, Rational(0));
        e[j] = 1;
        auto col = rat_solve(M, e);
        if (!col) return std::nullopt;
        for (int i = 0; i < n; ++i) inv[i][j] = (*col)[i];
    }
    return inv;
}

std::optional<RMat> rationalize_matrix(const Mat& A) {
    RMat R(A.rows(), RVec(A.cols()));
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            auto q = rationalize_strict(A(i, j));
            if (!q) return std::nullopt;
            R[i][j] = *q;
        }
    return R;
}

Mat to_double(const RMat& A) {
    Mat D(A.size(), A.empty() ? 0 : A[0].size());
    for (Eigen::Index i = 0; i < D.rows(); ++i)
        for (Eigen::Index j = 0; j < D.cols(); ++j) D(i, j) = to_double(A[i][j]);
    return D;
}

}  // namespace dynkit
