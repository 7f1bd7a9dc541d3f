#pragma once

// Truncated multivariate polynomials over double, complex<double> or Rational.
// A TaylorMap stores multi-index -> coefficient vector, which is what the
// manifold and normal-form code calls a TaylorMapPoly.

#include "dynkit/core.hpp"
#include "dynkit/rational.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <vector>

namespace dynkit {

using MultiIndex = std::vector<int>;

int mi_degree(const MultiIndex& a);

// All multi-indices of n variables with |a| = k, lexicographically descending:
// (2,0), (1,1), (0,2) for n = 2, k = 2.
std::vector<MultiIndex> monomials_of_degree(int n, int k);

template <class S>
inline bool is_zero(const S& x) { return x == S(0); }

template <class S>
using PolyS = std::map<MultiIndex, S>;

template <class S>
void poly_add_term(PolyS<S>& p, const MultiIndex& a, const S& c) {
    if (is_zero(c)) return;
    auto it = p.find(a);
    if (it == p.end()) {
        p.emplace(a, c);
        return;
    }
    it->second += c;
    if (is_zero(it->second)) p.erase(it);
}

template <class S>
void poly_axpy(PolyS<S>& y, const S& s, const PolyS<S>& x) {
    for (const auto& [a, c] : x) poly_add_term(y, a, S(s * c));
}

template <class S>
PolyS<S> poly_mul(const PolyS<S>& x, const PolyS<S>& y, int maxdeg) {
    PolyS<S> out;
    for (const auto& [a, ca] : x) {
        int da = mi_degree(a);
        for (const auto& [b, cb] : y) {
            if (da + mi_degree(b) > maxdeg) continue;
            MultiIndex c(a.size());
            for (size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
            poly_add_term(out, c, S(ca * cb));
        }
    }
    return out;
}

template <class S>
PolyS<S> poly_diff(const PolyS<S>& p, int i) {
    PolyS<S> out;
    for (const auto& [a, c] : p) {
        if (a[i] == 0) continue;
        MultiIndex b = a;
        b[i] -= 1;
        poly_add_term(out, b, S(c * S(a[i])));
    }
    return out;
}

template <class S>
PolyS<S> poly_truncate(const PolyS<S>& p, int maxdeg) {
    PolyS<S> out;
    for (const auto& [a, c] : p)
        if (mi_degree(a) <= maxdeg) out.emplace(a, c);
    return out;
}

template <class S>
PolyS<S> poly_degree_part(const PolyS<S>& p, int k) {
    PolyS<S> out;
    for (const auto& [a, c] : p)
        if (mi_degree(a) == k) out.emplace(a, c);
    return out;
}

template <class S, class T>
T poly_eval(const PolyS<S>& p, const std::vector<T>& x) {
    T sum = T(0);
    for (const auto& [a, c] : p) {
        T term = T(c);
        for (size_t i = 0; i < a.size(); ++i)
            for (int e = 0; e < a[i]; ++e) term *= x[i];
        sum += term;
    }
    return sum;
}

template <class S>
struct TaylorMap {
    int in_dim = 0;
    int out_dim = 0;
    std::map<MultiIndex, std::vector<S>> terms;

    TaylorMap() = default;
    TaylorMap(int in, int out) : in_dim(in), out_dim(out) {}

    int degree() const {
        int d = 0;
        for (const auto& kv : terms) d = std::max(d, mi_degree(kv.first));
        return d;
    }

    S coeff(const MultiIndex& a, int j) const {
        auto it = terms.find(a);
        return it == terms.end() ? S(0) : it->second[j];
    }

    void add(const MultiIndex& a, int j, const S& c) {
        if (is_zero(c)) return;
        auto it = terms.find(a);
        if (it == terms.end()) it = terms.emplace(a, std::vector<S>(out_dim, S(0))).first;
        it->second[j] += c;
        for (const auto& v : it->second)
            if (!is_zero(v)) return;
        terms.erase(it);
    }

    std::vector<PolyS<S>> components() const {
        std::vector<PolyS<S>> out(out_dim);
        for (const auto& [a, v] : terms)
            for (int j = 0; j < out_dim; ++j)
                if (!is_zero(v[j])) out[j].emplace(a, v[j]);
        return out;
    }

    static TaylorMap from_components(int in_dim, const std::vector<PolyS<S>>& comps) {
        TaylorMap m(in_dim, static_cast<int>(comps.size()));
        for (int j = 0; j < m.out_dim; ++j)
            for (const auto& [a, c] : comps[j]) m.add(a, j, c);
        return m;
    }

    TaylorMap truncated(int maxdeg) const {
        TaylorMap m(in_dim, out_dim);
        for (const auto& [a, v] : terms)
            if (mi_degree(a) <= maxdeg) m.terms.emplace(a, v);
        return m;
    }

    TaylorMap degree_range(int lo, int hi) const {
        TaylorMap m(in_dim, out_dim);
        for (const auto& [a, v] : terms) {
            int d = mi_degree(a);
            if (d >= lo && d <= hi) m.terms.emplace(a, v);
        }
        return m;
    }

    template <class T>
    std::vector<T> eval(const std::vector<T>& x) const {
        std::vector<T> out(out_dim, T(0));
        for (const auto& [a, v] : terms) {
            T mon = T(1);
            for (size_t i = 0; i < a.size(); ++i)
                for (int e = 0; e < a[i]; ++e) mon *= x[i];
            for (int j = 0; j < out_dim; ++j)
                if (!is_zero(v[j])) out[j] += T(v[j]) * mon;
        }
        return out;
    }
};

template <class S2, class S1, class Conv>
TaylorMap<S2> convert_map(const TaylorMap<S1>& m, Conv conv) {
    TaylorMap<S2> out(m.in_dim, m.out_dim);
    for (const auto& [a, v] : m.terms)
        for (int j = 0; j < m.out_dim; ++j) out.add(a, j, conv(v[j]));
    return out;
}

TaylorMap<double> to_double_map(const TaylorMap<Rational>& m);
TaylorMap<cplx> to_complex_map(const TaylorMap<double>& m);

// Substitute x_i = inner[i](z) into every component of outer, truncating at maxdeg.
template <class S>
std::vector<PolyS<S>> poly_compose(const TaylorMap<S>& outer, const std::vector<PolyS<S>>& inner, int nz,
                                   int maxdeg) {
    const int m = outer.in_dim;
    std::map<MultiIndex, PolyS<S>> cache;
    MultiIndex zero(m, 0);
    PolyS<S> one;
    one.emplace(MultiIndex(nz, 0), S(1));
    cache.emplace(zero, one);
    // Lowest degree of each inner component, used to skip products that can
    // only contribute above maxdeg.
    std::vector<int> low(m, 0);
    for (int i = 0; i < m; ++i) {
        int lo = 1 << 20;
        for (const auto& kv : inner[i]) lo = std::min(lo, mi_degree(kv.first));
        low[i] = inner[i].empty() ? (1 << 20) : lo;
    }
    std::function<const PolyS<S>&(const MultiIndex&)> power = [&](const MultiIndex& a) -> const PolyS<S>& {
        auto it = cache.find(a);
        if (it != cache.end()) return it->second;
        int i = 0;
        while (a[i] == 0) ++i;
        MultiIndex b = a;
        b[i] -= 1;
        PolyS<S> prod = poly_mul(power(b), inner[i], maxdeg);
        return cache.emplace(a, std::move(prod)).first->second;
    };
    std::vector<PolyS<S>> out(outer.out_dim);
    for (const auto& [a, v] : outer.terms) {
        long lowdeg = 0;
        for (int i = 0; i < m; ++i) lowdeg += static_cast<long>(a[i]) * low[i];
        if (lowdeg > maxdeg) continue;
        const PolyS<S>& pw = power(a);
        for (int j = 0; j < outer.out_dim; ++j)
            if (!is_zero(v[j])) poly_axpy(out[j], v[j], pw);
    }
    return out;
}

template <class S>
std::vector<PolyS<S>> identity_polys(int n) {
    std::vector<PolyS<S>> out(n);
    for (int i = 0; i < n; ++i) {
        MultiIndex a(n, 0);
        a[i] = 1;
        out[i].emplace(a, S(1));
    }
    return out;
}

// Linear substitution x = x0 + M z written as polynomials in z.
template <class S>
std::vector<PolyS<S>> affine_polys(const std::vector<S>& x0, const std::vector<std::vector<S>>& M) {
    const int n = static_cast<int>(M.size());
    const int nz = n ? static_cast<int>(M[0].size()) : 0;
    std::vector<PolyS<S>> out(n);
    for (int i = 0; i < n; ++i) {
        poly_add_term(out[i], MultiIndex(nz, 0), x0[i]);
        for (int k = 0; k < nz; ++k) {
            MultiIndex a(nz, 0);
            a[k] = 1;
            poly_add_term(out[i], a, M[i][k]);
        }
    }
    return out;
}

}  // namespace dynkit
