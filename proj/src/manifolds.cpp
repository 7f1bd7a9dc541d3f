#include "dynkit/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace dynkit {

// ---------------------------------------------------------------- JSON

nlohmann::json taylor_json(const TaylorMapPoly& p) {
    nlohmann::json j;
    j["in_dim"] = p.in_dim();
    j["out_dim"] = p.out_dim();
    auto terms = nlohmann::json::array();
    if (p.exact) {
        for (const auto& [a, v] : p.exact->terms) {
            auto c = nlohmann::json::array();
            for (const auto& x : v) c.push_back(rat_str(x));
            terms.push_back({{"alpha", a}, {"coeff", c}});
        }
    } else {
        for (const auto& [a, v] : p.num.terms) terms.push_back({{"alpha", a}, {"coeff", v}});
    }
    j["terms"] = terms;
    return j;
}

TaylorMapPoly taylor_from_json(const nlohmann::json& j) {
    int in = j.at("in_dim"), out = j.at("out_dim");
    bool exact = true;
    for (const auto& t : j.at("terms"))
        for (const auto& c : t.at("coeff"))
            if (!c.is_string()) exact = false;
    if (exact) {
        TaylorMap<Rational> m(in, out);
        for (const auto& t : j.at("terms")) {
            MultiIndex a = t.at("alpha").get<MultiIndex>();
            for (int k = 0; k < out; ++k) m.add(a, k, parse_rational(t.at("coeff")[k].get<std::string>()));
        }
        return TaylorMapPoly(m);
    }
    TaylorMap<double> m(in, out);
    for (const auto& t : j.at("terms")) {
        MultiIndex a = t.at("alpha").get<MultiIndex>();
        for (int k = 0; k < out; ++k) m.add(a, k, t.at("coeff")[k].get<double>());
    }
    return TaylorMapPoly(m);
}

// ---------------------------------------------------------------- spectral split

namespace {

int region_of(cplx z, double tol) { return z.real() < -tol ? 0 : (z.real() > tol ? 2 : 1); }

int block_of(const SpectralSplit& s, int i) { return i < s.n_minus ? 0 : (i < s.n_minus + s.n_zero ? 1 : 2); }

}  // namespace

Mat SpectralSplit::blocks() const {
    const int n = n_minus + n_zero + n_plus;
    Mat L = Mat::Zero(n, n);
    L.block(0, 0, n_minus, n_minus) = B;
    L.block(n_minus, n_minus, n_zero, n_zero) = C;
    L.block(n_minus + n_zero, n_minus + n_zero, n_plus, n_plus) = Aplus;
    return L;
}

SpectralSplit spectral_split(const Mat& A, double zero_tol) {
    const int n = static_cast<int>(A.rows());
    if (A.cols() != n) throw Error(Err::DimensionMismatch, "spectral_split needs a square matrix");
    Eigen::EigenSolver<Mat> es(A, false);
    std::vector<cplx> eig(es.eigenvalues().data(), es.eigenvalues().data() + n);
    int count[3] = {0, 0, 0};
    for (cplx z : eig) {
        double re = std::abs(z.real());
        if (re > zero_tol && re <= 10 * zero_tol)
            throw Error(Err::IllConditionedSplit, "eigenvalue real part " + std::to_string(z.real()) +
                                                      " too close to the boundary");
        ++count[region_of(z, zero_tol)];
    }
    // The invariant subspace of a region is the range of the product of
    // (A - z I) over the eigenvalues outside it. Pivoted columns of that
    // product give a basis that stays exact for simple cases.
    Mat T(n, n);
    int col = 0;
    for (int r = 0; r < 3; ++r) {
        if (count[r] == 0) continue;
        CMat P = CMat::Identity(n, n);
        for (cplx z : eig)
            if (region_of(z, zero_tol) != r) P = (A.cast<cplx>() - z * CMat::Identity(n, n)) * P;
        Mat Pr = P.real();
        Eigen::ColPivHouseholderQR<Mat> qr(Pr);
        qr.setThreshold(1e-9);
        if (qr.rank() != count[r])
            throw Error(Err::IllConditionedSplit, "invariant subspace has unexpected rank");
        for (int k = 0; k < count[r]; ++k) {
            Vec v = Pr.col(qr.colsPermutation().indices()[k]);
            Eigen::Index imax = 0;
            v.cwiseAbs().maxCoeff(&imax);
            T.col(col++) = v / v[imax];
        }
    }
    Eigen::FullPivLU<Mat> lu(T);
    if (lu.rank() < n || lu.rcond() < 1e-12) throw Error(Err::IllConditionedSplit, "block transform is singular");
    SpectralSplit s;
    s.T = T;
    s.Tinv = lu.inverse();
    s.n_minus = count[0];
    s.n_zero = count[1];
    s.n_plus = count[2];
    Mat L = s.Tinv * A * T;
    double off = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (block_of(s, i) != block_of(s, j)) off = std::max(off, std::abs(L(i, j)));
    if (off > 1e-8 * std::max(1.0, A.norm()))
        throw Error(Err::IllConditionedSplit, "off-block residual " + std::to_string(off));
    s.B = L.block(0, 0, s.n_minus, s.n_minus);
    s.C = L.block(s.n_minus, s.n_minus, s.n_zero, s.n_zero);
    s.Aplus = L.block(s.n_minus + s.n_zero, s.n_minus + s.n_zero, s.n_plus, s.n_plus);
    return s;
}

const char* manifold_kind_name(ManifoldKind k) {
    switch (k) {
    case ManifoldKind::Stable: return "stable";
    case ManifoldKind::Center: return "center";
    case ManifoldKind::Unstable: return "unstable";
    }
    return "?";
}

ManifoldKind parse_manifold_kind(const std::string& s) {
    if (s == "stable") return ManifoldKind::Stable;
    if (s == "center") return ManifoldKind::Center;
    if (s == "unstable") return ManifoldKind::Unstable;
    throw Error(Err::Usage, "manifold kind must be stable, center or unstable");
}

// ---------------------------------------------------------------- Taylor expansion

TaylorMap<double> taylor_expand_fd(const SystemDef& sys, const Vec& x0, int order) {
    const int n = sys.dim;
    TaylorMap<double> out(n, n);
    Mat J = jacobian_at(sys, x0);
    for (int i = 0; i < n; ++i) {
        MultiIndex a(n, 0);
        a[i] = 1;
        for (int j = 0; j < n; ++j) out.add(a, j, J(j, i));
    }
    const double h0 = 1e-2 * std::max(1.0, x0.cwiseAbs().maxCoeff());
    // D^a f by the tensor product of central k-th differences
    // sum_j (-1)^j C(k,j) f(x + (k/2 - j) h) / h^k, which are O(h^2).
    auto central = [&](const MultiIndex& a, double h) {
        Vec acc = Vec::Zero(n);
        std::vector<int> j(n, 0);
        while (true) {
            double w = 1.0;
            Vec x = x0;
            for (int i = 0; i < n; ++i) {
                double binom = std::tgamma(a[i] + 1.0) / (std::tgamma(j[i] + 1.0) * std::tgamma(a[i] - j[i] + 1.0));
                w *= (j[i] % 2 ? -1.0 : 1.0) * binom;
                x[i] += (0.5 * a[i] - j[i]) * h;
            }
            acc += w * evaluate_raw(sys, x);
            int k = 0;
            while (k < n && ++j[k] > a[k]) j[k++] = 0;
            if (k == n) break;
        }
        return Vec(acc / std::pow(h, mi_degree(a)));
    };
    for (int k = 2; k <= order; ++k)
        for (const auto& a : monomials_of_degree(n, k)) {
            Vec d1 = central(a, h0), d2 = central(a, 0.5 * h0);
            Vec d = (4.0 * d2 - d1) / 3.0;
            double fact = 1.0;
            for (int v : a) fact *= std::tgamma(v + 1.0);
            for (int j = 0; j < n; ++j) {
                double c = d[j] / fact;
                // Differences of an exact polynomial leave roundoff-level noise.
                if (std::abs(c) > 1e-9) out.add(a, j, c);
            }
        }
    return out;
}

namespace {

template <class S>
std::vector<PolyS<S>> linear_change(const std::vector<PolyS<S>>& comps, const std::vector<std::vector<S>>& M) {
    std::vector<PolyS<S>> out(M.size());
    for (size_t j = 0; j < M.size(); ++j)
        for (size_t i = 0; i < comps.size(); ++i)
            if (!is_zero(M[j][i])) poly_axpy(out[j], M[j][i], comps[i]);
    return out;
}

std::vector<std::vector<double>> to_rows(const Mat& A) {
    std::vector<std::vector<double>> r(A.rows(), std::vector<double>(A.cols()));
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) r[i][j] = A(i, j);
    return r;
}

std::optional<RMat> rationalize_near_matrix(const Mat& A) {
    RMat R(A.rows(), RVec(A.cols()));
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            auto q = rationalize_near(A(i, j), 1e-11, 10000);
            if (!q) return std::nullopt;
            R[i][j] = *q;
        }
    return R;
}

// Exact block form of a polynomial field; nullopt when the rationalized
// equilibrium or transform fails the exact checks.
std::optional<LocalField> exact_local_field(const TaylorMap<Rational>& f, const Vec& eq, const SpectralSplit& s,
                                            int order) {
    const int n = static_cast<int>(eq.size());
    auto Tq = rationalize_near_matrix(s.T);
    auto eqm = rationalize_near_matrix(Mat(eq));
    if (!Tq || !eqm) return std::nullopt;
    auto Tinvq = rat_inverse(*Tq);
    if (!Tinvq) return std::nullopt;
    RVec x0(n);
    for (int i = 0; i < n; ++i) x0[i] = (*eqm)[i][0];
    auto comps = linear_change(poly_compose(f, affine_polys(x0, *Tq), n, order), *Tinvq);
    TaylorMap<Rational> G = TaylorMap<Rational>::from_components(n, comps);
    for (const auto& [a, v] : G.terms) {
        int d = mi_degree(a);
        if (d == 0) return std::nullopt;
        if (d == 1) {
            int l = static_cast<int>(std::find(a.begin(), a.end(), 1) - a.begin());
            for (int j = 0; j < n; ++j)
                if (v[j] != 0 && block_of(s, j) != block_of(s, l)) return std::nullopt;
        }
    }
    LocalField lf;
    lf.split = s;
    lf.split.T = to_double(*Tq);
    lf.split.Tinv = to_double(*Tinvq);
    Mat L(n, n);
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
            MultiIndex a(n, 0);
            a[l] = 1;
            L(j, l) = to_double(G.coeff(a, j));
        }
    lf.split.B = L.block(0, 0, s.n_minus, s.n_minus);
    lf.split.C = L.block(s.n_minus, s.n_minus, s.n_zero, s.n_zero);
    lf.split.Aplus = L.block(s.n_minus + s.n_zero, s.n_minus + s.n_zero, s.n_plus, s.n_plus);
    lf.eq = eq;
    for (int i = 0; i < n; ++i) lf.eq[i] = to_double(x0[i]);
    lf.T_exact = *Tq;
    lf.Tinv_exact = *Tinvq;
    lf.G = TaylorMapPoly(G);
    return lf;
}

}  // namespace

LocalField local_field(const SystemDef& sys, const Vec& eq, int order, double zero_tol) {
    if (sys.kind != Kind::Flow || !sys.autonomous) throw Error(Err::Usage, "local manifolds need an autonomous flow");
    if (eq.size() != sys.dim) throw Error(Err::DimensionMismatch, "equilibrium dimension");
    double res = evaluate_raw(sys, eq).norm();
    if (!(res <= 1e-8)) throw Error(Err::Usage, "point is not an equilibrium (residual " + std::to_string(res) + ")");
    const int n = sys.dim;
    SpectralSplit s = spectral_split(jacobian_at(sys, eq), zero_tol);

    auto poly = exact_polynomial(sys);
    if (poly)
        if (auto lf = exact_local_field(*poly, eq, s, order)) return *lf;

    std::vector<PolyS<double>> comps;
    if (poly) {
        std::vector<double> x0(eq.data(), eq.data() + n);
        comps = poly_compose(to_double_map(*poly), affine_polys(x0, to_rows(s.T)), n, order);
    } else {
        if (order > 5) throw Error(Err::OrderTooHigh, "finite-difference Taylor mode is capped at order 5");
        comps = poly_compose(taylor_expand_fd(sys, eq, order), affine_polys(std::vector<double>(n, 0.0), to_rows(s.T)),
                             n, order);
    }
    comps = linear_change(comps, to_rows(s.Tinv));
    TaylorMap<double> G(n, n);
    Mat L = s.blocks();
    for (int l = 0; l < n; ++l) {
        MultiIndex a(n, 0);
        a[l] = 1;
        for (int j = 0; j < n; ++j) G.add(a, j, L(j, l));
    }
    for (int j = 0; j < n; ++j)
        for (const auto& [a, c] : comps[j])
            if (mi_degree(a) >= 2) G.add(a, j, c);
    LocalField lf;
    lf.eq = eq;
    lf.split = s;
    lf.G = TaylorMapPoly(G);
    return lf;
}

// ---------------------------------------------------------------- graph solve

namespace {

template <class S>
using Rows = std::vector<std::vector<S>>;

std::optional<std::vector<double>> solve_double(const Rows<double>& M, const std::vector<double>& b) {
    const int n = static_cast<int>(M.size());
    Mat A(n, n);
    Vec r(n);
    for (int i = 0; i < n; ++i) {
        r[i] = b[i];
        for (int j = 0; j < n; ++j) A(i, j) = M[i][j];
    }
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (n > 0 && sv[n - 1] < 1e-10 * std::max(sv[0], 1e-300)) return std::nullopt;
    Vec x = svd.solve(r);
    return std::vector<double>(x.data(), x.data() + n);
}

std::optional<RVec> solve_exact(const Rows<Rational>& M, const RVec& b) { return rat_solve(M, b); }

template <class S, class Solver>
TaylorMap<S> solve_graph(const TaylorMap<S>& G, const std::vector<int>& in, const std::vector<int>& out, int order,
                         Solver solve) {
    const int n = G.in_dim, m = static_cast<int>(in.size()), q = static_cast<int>(out.size());
    auto lin = [&](int j, int l) {
        MultiIndex a(n, 0);
        a[l] = 1;
        return G.coeff(a, j);
    };
    Rows<S> Ain(m, std::vector<S>(m)), Aout(q, std::vector<S>(q));
    for (int i = 0; i < m; ++i)
        for (int l = 0; l < m; ++l) Ain[i][l] = lin(in[i], in[l]);
    for (int i = 0; i < q; ++i)
        for (int l = 0; l < q; ++l) Aout[i][l] = lin(out[i], out[l]);
    TaylorMap<S> nonlin = G.degree_range(2, order);

    std::vector<PolyS<S>> h(q);
    for (int k = 2; k <= order; ++k) {
        // Right-hand side [g_out(w) - Dh g_in(w)]_k with w = (z, h_{<k}(z)).
        std::vector<PolyS<S>> w(n);
        auto zid = identity_polys<S>(m);
        for (int i = 0; i < m; ++i) w[in[i]] = zid[i];
        for (int j = 0; j < q; ++j) w[out[j]] = h[j];
        auto gw = poly_compose(nonlin, w, m, k);
        std::vector<PolyS<S>> rhs(q);
        for (int j = 0; j < q; ++j) {
            rhs[j] = poly_degree_part(gw[out[j]], k);
            for (int i = 0; i < m; ++i) {
                auto prod = poly_degree_part(poly_mul(poly_diff(h[j], i), gw[in[i]], k), k);
                poly_axpy(rhs[j], S(-1), prod);
            }
        }
        auto basis = monomials_of_degree(m, k);
        const int nb = static_cast<int>(basis.size());
        std::map<MultiIndex, int> idx;
        for (int b = 0; b < nb; ++b) idx[basis[b]] = b;
        const int N = nb * q;
        Rows<S> M(N, std::vector<S>(N, S(0)));
        for (int b = 0; b < nb; ++b)
            for (int jp = 0; jp < q; ++jp) {
                int col = b * q + jp;
                const auto& beta = basis[b];
                for (int i = 0; i < m; ++i) {
                    if (beta[i] == 0) continue;
                    for (int l = 0; l < m; ++l) {
                        if (is_zero(Ain[i][l])) continue;
                        MultiIndex g = beta;
                        g[i] -= 1;
                        g[l] += 1;
                        M[idx[g] * q + jp][col] += S(beta[i]) * Ain[i][l];
                    }
                }
                for (int j = 0; j < q; ++j) M[b * q + j][col] -= Aout[j][jp];
            }
        std::vector<S> r(N, S(0));
        for (int j = 0; j < q; ++j)
            for (const auto& [a, c] : rhs[j]) r[idx[a] * q + j] = c;
        auto sol = solve(M, r);
        if (!sol) throw Error(Err::ResonanceObstruction, "graph operator is singular at degree " + std::to_string(k));
        for (int b = 0; b < nb; ++b)
            for (int j = 0; j < q; ++j) poly_add_term(h[j], basis[b], (*sol)[b * q + j]);
    }
    return TaylorMap<S>::from_components(m, h);
}

std::vector<int> block_indices(const SpectralSplit& s, int block) {
    std::vector<int> v;
    for (int i = 0; i < s.n_minus + s.n_zero + s.n_plus; ++i)
        if (block_of(s, i) == block) v.push_back(i);
    return v;
}

}  // namespace

ManifoldGraph local_manifold_taylor(const SystemDef& sys, const Vec& eq, ManifoldKind which, int order,
                                    double zero_tol) {
    if (order < 2) throw Error(Err::Usage, "order must be at least 2");
    if (order > 10) throw Error(Err::OrderTooHigh, "order is capped at 10");
    ManifoldGraph g;
    g.which = which;
    g.order = order;
    g.field = local_field(sys, eq, order, zero_tol);
    int block = which == ManifoldKind::Stable ? 0 : which == ManifoldKind::Center ? 1 : 2;
    g.in_idx = block_indices(g.field.split, block);
    if (g.in_idx.empty()) throw Error(Err::Usage, std::string(manifold_kind_name(which)) + " block is empty");
    for (int b = 0; b < 3; ++b)
        if (b != block)
            for (int i : block_indices(g.field.split, b)) g.out_idx.push_back(i);
    if (g.field.G.exact)
        g.h = TaylorMapPoly(solve_graph<Rational>(*g.field.G.exact, g.in_idx, g.out_idx, order, solve_exact));
    else
        g.h = TaylorMapPoly(solve_graph<double>(g.field.G.num, g.in_idx, g.out_idx, order, solve_double));
    return g;
}

namespace {

template <class S>
TaylorMap<S> reduce_impl(const TaylorMap<S>& G, const TaylorMap<S>& h, const std::vector<int>& in,
                         const std::vector<int>& out, int order) {
    const int n = G.in_dim, m = static_cast<int>(in.size());
    std::vector<PolyS<S>> w(n);
    auto zid = identity_polys<S>(m);
    auto hc = h.components();
    for (int i = 0; i < m; ++i) w[in[i]] = zid[i];
    for (size_t j = 0; j < out.size(); ++j) w[out[j]] = hc[j];
    auto gw = poly_compose(G.truncated(order), w, m, order);
    std::vector<PolyS<S>> red(m);
    for (int i = 0; i < m; ++i) red[i] = gw[in[i]];
    return TaylorMap<S>::from_components(m, red);
}

}  // namespace

TaylorMapPoly reduced_dynamics(const ManifoldGraph& g, int order) {
    if (g.field.G.exact && g.h.exact)
        return TaylorMapPoly(reduce_impl(*g.field.G.exact, *g.h.exact, g.in_idx, g.out_idx, order));
    return TaylorMapPoly(reduce_impl(g.field.G.num, g.h.num, g.in_idx, g.out_idx, order));
}

double verify_invariance(const SystemDef& sys, const ManifoldGraph& g, double radius, int n_samples) {
    const int n = sys.dim, m = static_cast<int>(g.in_idx.size()), q = static_cast<int>(g.out_idx.size());
    std::vector<TaylorMap<double>> dh;
    for (int i = 0; i < m; ++i) {
        std::vector<PolyS<double>> d;
        for (const auto& c : g.h.num.components()) d.push_back(poly_diff(c, i));
        dh.push_back(TaylorMap<double>::from_components(m, d));
    }
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> n01;
    double worst = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        std::vector<double> z(m);
        double nz = 0;
        for (auto& v : z) {
            v = n01(rng);
            nz += v * v;
        }
        nz = std::sqrt(nz);
        for (auto& v : z) v *= radius / nz;
        auto hz = g.h.num.eval(z);
        Vec w(n);
        for (int i = 0; i < m; ++i) w[g.in_idx[i]] = z[i];
        for (int j = 0; j < q; ++j) w[g.out_idx[j]] = hz[j];
        Vec F = g.field.split.Tinv * evaluate_raw(sys, Vec(g.field.eq + g.field.split.T * w));
        Vec r(q);
        for (int j = 0; j < q; ++j) r[j] = F[g.out_idx[j]];
        for (int i = 0; i < m; ++i) {
            auto col = dh[i].eval(z);
            for (int j = 0; j < q; ++j) r[j] -= col[j] * F[g.in_idx[i]];
        }
        worst = std::max(worst, q ? r.norm() : 0.0);
    }
    return worst;
}

// ---------------------------------------------------------------- extended system

namespace {

// Coefficients of the base polynomial are polynomials in the chosen
// parameter; recover them exactly by interpolation at integer nodes.
std::optional<TaylorMap<Rational>> interpolate_in_param(
    const std::function<TaylorMap<Rational>(const std::vector<Rational>&)>& base, std::vector<Rational> p, int k,
    int n) {
    for (int D = 1; D <= 6; ++D) {
        std::vector<TaylorMap<Rational>> vals;
        for (int node = 0; node <= D + 1; ++node) {
            p[k] = node;
            vals.push_back(base(p));
        }
        std::map<std::pair<MultiIndex, int>, bool> keys;
        for (const auto& v : vals)
            for (const auto& [a, c] : v.terms)
                for (int j = 0; j < n; ++j)
                    if (c[j] != 0) keys[{a, j}] = true;
        RMat V(D + 1, RVec(D + 1));
        for (int r = 0; r <= D; ++r) {
            Rational x = 1;
            for (int c = 0; c <= D; ++c) {
                V[r][c] = x;
                x *= r;
            }
        }
        TaylorMap<Rational> ext(n + 1, n + 1);
        bool ok = true;
        for (const auto& [key, _] : keys) {
            RVec y(D + 1);
            for (int r = 0; r <= D; ++r) y[r] = vals[r].coeff(key.first, key.second);
            auto a = rat_solve(V, y);
            Rational check = 0, xp = 1;
            for (int c = 0; c <= D; ++c) {
                check += (*a)[c] * xp;
                xp *= D + 1;
            }
            if (check != vals[D + 1].coeff(key.first, key.second)) {
                ok = false;
                break;
            }
            for (int c = 0; c <= D; ++c) {
                MultiIndex b = key.first;
                b.push_back(c);
                ext.add(b, key.second, (*a)[c]);
            }
        }
        if (ok) return ext;
    }
    return std::nullopt;
}

}  // namespace

SystemDef extend_with_parameter(const SystemDef& sys, const std::string& param) {
    const int k = sys.param_index(param);
    if (sys.kind != Kind::Flow) throw Error(Err::Usage, "parameter extension is defined for flows");
    const int n = sys.dim;
    auto base = sys.model;
    auto m = std::make_shared<Model>();
    if (base->poly) {
        auto builder = base->poly;
        m->poly = [builder, k, n](const std::vector<Rational>& p) {
            auto ext = interpolate_in_param(builder, p, k, n);
            if (!ext) throw Error(Err::Degenerate, "field is not polynomial in the parameter");
            return *ext;
        };
    }
    if (base->f) {
        auto with_lambda = [k, n](const Vec& xe, Vec p) {
            p[k] = xe[n];
            return p;
        };
        m->f = [base, with_lambda, n](double t, const Vec& xe, const Vec& p) {
            Vec y = Vec::Zero(n + 1);
            y.head(n) = base->f(t, xe.head(n), with_lambda(xe, p));
            return y;
        };
        m->jac = [base, with_lambda, n, k](double t, const Vec& xe, const Vec& p) {
            Vec pl = with_lambda(xe, p);
            Vec x = xe.head(n);
            Mat J = Mat::Zero(n + 1, n + 1);
            if (base->jac) {
                J.block(0, 0, n, n) = base->jac(t, x, pl);
            } else {
                for (int i = 0; i < n; ++i) {
                    double h = std::max(1e-6, 1e-6 * std::abs(x[i]));
                    Vec xp = x, xm = x;
                    xp[i] += h;
                    xm[i] -= h;
                    J.block(0, i, n, 1) = (base->f(t, xp, pl) - base->f(t, xm, pl)) / (2 * h);
                }
            }
            if (base->dfdp) {
                J.block(0, n, n, 1) = base->dfdp(t, x, pl, k);
            } else {
                double h = std::max(1e-6, 1e-6 * std::abs(pl[k]));
                Vec pp = pl, pm = pl;
                pp[k] += h;
                pm[k] -= h;
                J.block(0, n, n, 1) = (base->f(t, x, pp) - base->f(t, x, pm)) / (2 * h);
            }
            return J;
        };
    }
    SystemDef ext = model_system(sys.name + "+" + param, Kind::Flow, n + 1, sys.params, m);
    ext.periodic_coords = sys.periodic_coords;
    return ext;
}

}  // namespace dynkit
