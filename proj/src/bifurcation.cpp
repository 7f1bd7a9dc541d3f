#include "dynkit/bifurcation.hpp"

#include "dynkit/io.hpp"
#include "dynkit/parallel.hpp"
#include "dynkit/periodic.hpp"

#include <Eigen/SVD>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace dynkit {

const char* bif_kind_name(BifKind k) {
    switch (k) {
        case BifKind::SaddleNode: return "saddle_node";
        case BifKind::Transcritical: return "transcritical";
        case BifKind::Pitchfork: return "pitchfork";
        case BifKind::Hopf: return "hopf";
        case BifKind::Flip: return "flip";
        case BifKind::NeimarkSacker: return "neimark_sacker";
    }
    return "?";
}

namespace {

// Parameter-dependent zero problem G(x, lambda) = 0.
struct Problem {
    SystemDef sys;
    int k = 0;
    int n = 0;

    SystemDef at(double lam) const { return with_param(sys, sys.params[k].name, lam); }

    Vec G(const SystemDef& s, const Vec& x) const {
        Vec g = evaluate_raw(s, x);
        if (s.kind == Kind::Map) g -= x;
        return g;
    }
    Mat Gx(const SystemDef& s, const Vec& x) const {
        Mat J = jacobian_at(s, x);
        if (s.kind == Kind::Map) J -= Mat::Identity(n, n);
        return J;
    }
    Vec Gl(const SystemDef& s, const Vec& x) const { return dfdp_at(s, x, k); }
    Mat Gfull(const SystemDef& s, const Vec& x) const {
        Mat A(n, n + 1);
        A.leftCols(n) = Gx(s, x);
        A.col(n) = Gl(s, x);
        return A;
    }
};

double inv_cond(const Mat& A) {
    Eigen::JacobiSVD<Mat> svd(A);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) return 0.0;
    return s[s.size() - 1] / s[0];
}

// Newton in x at fixed lambda.
std::optional<Vec> correct_natural(const Problem& P, const SystemDef& s, Vec x, double tol) {
    for (int it = 0; it < 20; ++it) {
        Vec g = P.G(s, x);
        if (!all_finite(g)) return std::nullopt;
        Mat J = P.Gx(s, x);
        Eigen::FullPivLU<Mat> lu(J);
        if (lu.rank() < P.n) return std::nullopt;
        Vec dx = lu.solve(g);
        x -= dx;
        if (dx.norm() <= 1e-13 * std::max(1.0, x.norm())) break;
    }
    if (P.G(s, x).norm() > tol) return std::nullopt;
    return x;
}

// Unit tangent of the solution curve at z = (x, lambda), oriented along ref.
Vec tangent(const Problem& P, const Vec& z, const Vec& ref) {
    SystemDef s = P.at(z[P.n]);
    Mat A = P.Gfull(s, z.head(P.n));
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
    Vec t = svd.matrixV().col(P.n);
    if (t.dot(ref) < 0) t = -t;
    return t;
}

// Newton on (G, t.(z - zp)) = 0.
std::optional<Vec> correct_arclength(const Problem& P, Vec z, const Vec& t, const Vec& zp, double tol) {
    const int n = P.n;
    for (int it = 0; it < 20; ++it) {
        SystemDef s = P.at(z[n]);
        Vec r(n + 1);
        r.head(n) = P.G(s, z.head(n));
        r[n] = t.dot(z - zp);
        if (!all_finite(r)) return std::nullopt;
        Mat A(n + 1, n + 1);
        A.topRows(n) = P.Gfull(s, z.head(n));
        A.row(n) = t.transpose();
        Eigen::FullPivLU<Mat> lu(A);
        if (lu.rank() < n + 1) return std::nullopt;
        Vec dz = lu.solve(r);
        z -= dz;
        if (dz.norm() <= 1e-13 * std::max(1.0, z.norm())) break;
    }
    SystemDef s = P.at(z[n]);
    if (P.G(s, z.head(n)).norm() > tol) return std::nullopt;
    return z;
}

BranchPoint make_point(const Problem& P, double lam, const Vec& x) {
    BranchPoint bp;
    bp.lambda = lam;
    bp.x = x;
    auto rep = analyze_point(P.at(lam), x);
    bp.eigenvalues = rep.eigenvalues;
    bp.stability = rep.stability;
    return bp;
}

// Bisection on the sign of the tangent's lambda entry between za and zb.
FoldPoint refine_fold(const Problem& P, Vec za, Vec ta, Vec zb, double tol) {
    const int n = P.n;
    const double sa = ta[n];
    for (int it = 0; it < 60 && (zb - za).norm() > 1e-12 * std::max(1.0, za.norm()); ++it) {
        Vec zm = 0.5 * (za + zb);
        Vec d = (zb - za).normalized();
        auto z = correct_arclength(P, zm, d, zm, tol);
        if (!z) break;
        Vec t = tangent(P, *z, ta);
        if ((t[n] > 0) == (sa > 0)) {
            za = *z;
            ta = t;
        } else {
            zb = *z;
        }
    }
    Vec z = 0.5 * (za + zb);
    return {z[n], z.head(n)};
}

}  // namespace

Continuation continue_branch(const SystemDef& sys, const std::string& param, const Vec& x_start, double lambda_start,
                             double lambda_end, const ContinuationOptions& opts) {
    Problem P{sys, sys.param_index(param), sys.dim};
    const int n = P.n;
    if (x_start.size() != n) throw Error(Err::DimensionMismatch, "start point dimension");
    if (!(opts.step > 0)) throw Error(Err::Usage, "step must be positive");
    if (lambda_start == lambda_end) throw Error(Err::Usage, "empty parameter range");
    const double lo = std::min(lambda_start, lambda_end), hi = std::max(lambda_start, lambda_end);
    const double h_max = opts.step;
    const double h_min = opts.step * 1e-7;
    // Newton tolerance scaled by the size of the problem.
    const double tol = opts.tol * std::max(1.0, x_start.norm());

    auto x0 = correct_natural(P, P.at(lambda_start), x_start, tol);
    if (!x0) throw Error(Err::NoConvergence, "start point is not an equilibrium");

    Continuation out;
    out.param = param;
    out.branches.push_back({param, {make_point(P, lambda_start, *x0)}});
    int dir = lambda_end > lambda_start ? 1 : -1;
    bool natural = true;
    double h = h_max;
    Vec t_prev = Vec::Zero(n + 1);
    t_prev[n] = dir;
    int total = 1;

    auto in_range = [&](double l) { return l >= lo - 1e-14 && l <= hi + 1e-14; };

    while (total < opts.max_points) {
        Branch& br = out.branches.back();
        const BranchPoint cur = br.points.back();
        const double bound = dir > 0 ? hi : lo;
        if (natural) {
            if (dir * (cur.lambda - bound) >= 0) break;
            double dl = dir * h;
            bool landing = dir * (cur.lambda + dl - bound) >= 0;
            if (landing) dl = bound - cur.lambda;
            double lam = landing ? bound : cur.lambda + dl;
            Vec pred;
            if (br.points.size() >= 2) {
                const BranchPoint& prev = br.points[br.points.size() - 2];
                pred = cur.x + (cur.x - prev.x) * (dl / (cur.lambda - prev.lambda));
            } else {
                SystemDef s = P.at(cur.lambda);
                Eigen::FullPivLU<Mat> lu(P.Gx(s, cur.x));
                pred = lu.rank() == n ? Vec(cur.x - lu.solve(P.Gl(s, cur.x)) * dl) : cur.x;
            }
            SystemDef s = P.at(lam);
            auto x = correct_natural(P, s, pred, tol);
            bool ok = x.has_value();
            if (ok) {
                double jump = (*x - pred).norm();
                double scale = std::max((pred - cur.x).norm(), std::abs(dl));
                ok = jump <= 0.2 * scale + 1e-12 && inv_cond(P.Gx(s, *x)) > 1e-8;
            }
            if (ok) {
                br.points.push_back(make_point(P, lam, *x));
                ++total;
                Vec z(n + 1);
                z << *x, lam;
                Vec zc(n + 1);
                zc << cur.x, cur.lambda;
                t_prev = (z - zc).normalized();
                h = std::min(h_max, h * 1.5);
                continue;
            }
            h *= 0.5;
            if (h < h_max / 16) {
                natural = false;
                // Arclength start from the last good point.
            }
            continue;
        }

        // Pseudo-arclength step.
        Vec z(n + 1);
        z << cur.x, cur.lambda;
        Vec t = tangent(P, z, t_prev);
        Vec zp = z + h * t;
        auto zn = correct_arclength(P, zp, t, zp, tol);
        bool ok = zn.has_value() && (*zn - zp).norm() <= 0.5 * h;
        if (!ok) {
            h *= 0.5;
            if (h < h_min) throw Error(Err::BranchLost, "continuation step collapsed near lambda = " + fmt_double(cur.lambda));
            continue;
        }
        Vec tn = tangent(P, *zn, t);
        double ln = (*zn)[n];
        if ((tn[n] > 0) != (dir > 0) && std::abs(tn[n]) > 0) {
            if (static_cast<int>(out.folds.size()) >= opts.max_folds) break;
            out.folds.push_back(refine_fold(P, z, t, *zn, tol));
            dir = -dir;
            if (!in_range(ln)) break;
            out.branches.push_back({param, {make_point(P, ln, zn->head(n))}});
            ++total;
            t_prev = tn;
            h = std::min(h_max, 2 * h);
            continue;
        }
        if (!in_range(ln)) {
            // Land exactly on the bound with a natural step.
            natural = true;
            h = std::abs(bound - cur.lambda);
            if (h <= 1e-14) break;
            continue;
        }
        br.points.push_back(make_point(P, ln, zn->head(n)));
        ++total;
        t_prev = tn;
        h = std::min(h_max, h * 1.5);
        if (std::abs(tn[n]) >= 0.5 * tn.norm()) natural = true;
    }
    return out;
}

SystemDef difference_flow(const SystemDef& sys) {
    if (sys.kind == Kind::Flow) return sys;
    const int n = sys.dim;
    auto base = sys.model;
    auto m = std::make_shared<Model>();
    if (base->poly) {
        auto builder = base->poly;
        m->poly = [builder, n](const std::vector<Rational>& p) {
            auto f = builder(p);
            for (int i = 0; i < n; ++i) {
                MultiIndex a(n, 0);
                a[i] = 1;
                f.add(a, i, Rational(-1));
            }
            return f;
        };
    } else {
        SystemDef copy = sys;
        m->f = [copy, n](double t, const Vec& x, const Vec& p) {
            SystemDef s = copy;
            for (int i = 0; i < static_cast<int>(p.size()); ++i) s.params[i].value = p[i];
            s = with_params(s, {});
            return Vec(evaluate_raw(s, x, t) - x);
        };
        m->jac = [copy, n](double t, const Vec& x, const Vec& p) {
            SystemDef s = copy;
            for (int i = 0; i < static_cast<int>(p.size()); ++i) s.params[i].value = p[i];
            s = with_params(s, {});
            return Mat(jacobian_at(s, x, t) - Mat::Identity(n, n));
        };
        m->dfdp = [copy](double t, const Vec& x, const Vec& p, int k) {
            SystemDef s = copy;
            for (int i = 0; i < static_cast<int>(p.size()); ++i) s.params[i].value = p[i];
            s = with_params(s, {});
            return dfdp_at(s, x, k, t);
        };
    }
    return model_system(sys.name + "_minus_id", Kind::Flow, n, sys.params, m);
}

namespace {

template <class S>
S s_abs(const S& v) {
    return v < S(0) ? S(-v) : v;
}

// c_pq of the first component of Minv R(M (u, mu)).
template <class S>
std::map<std::pair<int, int>, S> reduce_to_line(const TaylorMap<S>& R, const std::vector<std::vector<S>>& M,
                                                const std::vector<S>& minv_row0) {
    std::vector<S> zero(2, S(0));
    auto inner = affine_polys(zero, M);
    auto comps = poly_compose(R, inner, 2, 3);
    std::map<std::pair<int, int>, S> c;
    for (int j = 0; j < 2; ++j)
        for (const auto& [a, v] : comps[j]) {
            if (mi_degree(a) > 3) continue;
            c[{a[0], a[1]}] += minv_row0[j] * v;
        }
    for (auto it = c.begin(); it != c.end();)
        it = it->second == S(0) ? c.erase(it) : std::next(it);
    return c;
}

// Columns m1 (null direction, a.m1 = 0, largest state entry +1) and m2 = a / |a|^2.
template <class S>
bool line_basis(const std::vector<std::vector<S>>& Tc, int n, std::vector<std::vector<S>>& M,
                std::vector<S>& minv0) {
    S a0 = Tc[n][0], a1 = Tc[n][1];
    S aa = a0 * a0 + a1 * a1;
    if (aa == S(0)) return false;
    S m10 = a1, m11 = -a0;
    S best = S(0);
    for (int i = 0; i < n; ++i) {
        S v = Tc[i][0] * m10 + Tc[i][1] * m11;
        if (s_abs(v) > s_abs(best)) best = v;
    }
    if (best == S(0)) return false;
    m10 /= best;
    m11 /= best;
    S m20 = a0 / aa, m21 = a1 / aa;
    M = {{m10, m20}, {m11, m21}};
    S det = m10 * m21 - m20 * m11;
    if (det == S(0)) return false;
    minv0 = {m21 / det, -m20 / det};
    return true;
}

}  // namespace

LocalCoeffs local_taylor_coeffs(const SystemDef& sys_in, const std::string& param, const Vec& x_c, double lambda_c) {
    SystemDef sys = difference_flow(with_param(sys_in, param, lambda_c));
    const int n = sys.dim;
    SystemDef ext = extend_with_parameter(sys, param);
    Vec z(n + 1);
    z << x_c, lambda_c;
    LocalField lf = local_field(ext, z, 3);
    if (lf.split.n_zero != 2)
        throw Error(Err::Usage, "center subspace of the extended field has dimension " +
                                    std::to_string(lf.split.n_zero) + ", expected 2");
    TaylorMapPoly R;
    std::vector<int> cidx;
    if (lf.split.n_minus + lf.split.n_plus == 0) {
        R = lf.G;
        cidx = {0, 1};
    } else {
        auto g = local_manifold_taylor(ext, z, ManifoldKind::Center, 3);
        R = reduced_dynamics(g, 3);
        cidx = g.in_idx;
        lf = g.field;
    }
    LocalCoeffs out;
    std::vector<std::vector<double>> Tc(n + 1, std::vector<double>(2));
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j < 2; ++j) Tc[i][j] = lf.split.T(i, cidx[j]);
    std::vector<std::vector<double>> M;
    std::vector<double> minv0;
    if (!line_basis(Tc, n, M, minv0))
        throw Error(Err::Degenerate, "parameter direction lies outside the center subspace");
    out.c = reduce_to_line(R.num, M, minv0);
    out.direction = Vec(n);
    for (int i = 0; i < n; ++i) out.direction[i] = Tc[i][0] * M[0][0] + Tc[i][1] * M[1][0];

    if (R.exact && lf.T_exact) {
        std::vector<std::vector<Rational>> Tq(n + 1, std::vector<Rational>(2));
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j < 2; ++j) Tq[i][j] = (*lf.T_exact)[i][cidx[j]];
        std::vector<std::vector<Rational>> Mq;
        std::vector<Rational> mq0;
        if (line_basis(Tq, n, Mq, mq0)) {
            out.exact = reduce_to_line(*R.exact, Mq, mq0);
            out.c.clear();
            for (const auto& [pq, v] : *out.exact) out.c[pq] = to_double(v);
        }
    }
    return out;
}

std::optional<std::vector<int>> odd_symmetry(const SystemDef& sys, const Vec& x_c, const Vec& v, double tol) {
    const int n = sys.dim;
    if (n > 12) return std::nullopt;
    std::vector<Vec> samples;
    uint64_t state = 0x9e3779b97f4a7c15ULL;
    auto next = [&] {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        return static_cast<double>(state >> 11) / 9007199254740992.0 - 0.5;
    };
    for (int k = 0; k < 8; ++k) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x[i] = x_c[i] + next();
        samples.push_back(x);
    }
    const double vs = std::max(1e-300, v.cwiseAbs().maxCoeff());
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        std::vector<int> S(n);
        for (int i = 0; i < n; ++i) S[i] = (mask >> i) & 1 ? -1 : 1;
        auto apply = [&](const Vec& x) {
            Vec y = x;
            for (int i = 0; i < n; ++i) y[i] *= S[i];
            return y;
        };
        if ((apply(x_c) - x_c).cwiseAbs().maxCoeff() > tol * std::max(1.0, x_c.norm())) continue;
        if ((apply(v) + v).cwiseAbs().maxCoeff() > 1e-9 * vs) continue;
        bool ok = true;
        for (const Vec& x : samples) {
            Vec a = evaluate_raw(sys, apply(x)), b = apply(evaluate_raw(sys, x));
            if ((a - b).cwiseAbs().maxCoeff() > tol * std::max(1.0, b.cwiseAbs().maxCoeff())) {
                ok = false;
                break;
            }
        }
        if (ok) return S;
    }
    return std::nullopt;
}

nlohmann::json LocalBifurcation::json() const {
    nlohmann::json j;
    j["kind"] = bif_kind_name(kind);
    switch (kind) {
        case BifKind::SaddleNode:
            j["direct"] = side > 0;
            j["side"] = side;
            j["upper_stable"] = upper_stable;
            j["branch_coeff"] = branch_coeff;
            break;
        case BifKind::Pitchfork:
            j["supercritical"] = supercritical;
            j["side"] = side;
            j["branch_coeff"] = branch_coeff;
            break;
        case BifKind::Transcritical:
            j["slopes"] = slopes;
            j["stable_for_positive_lambda"] = slope_stable_positive;
            break;
        default: break;
    }
    return j;
}

LocalBifurcation classify_local_bif(const CoeffTable& c, bool symmetry_odd, double tol) {
    auto get = [&](int p, int q) {
        auto it = c.find({p, q});
        return it == c.end() ? 0.0 : it->second;
    };
    double scale = 0.0;
    for (const auto& kv : c) scale = std::max(scale, std::abs(kv.second));
    const double z = tol * std::max(1.0, scale);
    auto nz = [&](double v) { return std::abs(v) > z; };
    const double c01 = get(0, 1), c20 = get(2, 0), c11 = get(1, 1), c30 = get(3, 0), c02 = get(0, 2);
    LocalBifurcation r;
    if (symmetry_odd || (!nz(c01) && !nz(c20) && nz(c11) && nz(c30))) {
        if (!nz(c11) || !nz(c30)) throw Error(Err::Degenerate, "pitchfork needs c11 and c30 nonzero");
        r.kind = BifKind::Pitchfork;
        r.supercritical = c30 < 0;
        r.branch_coeff = -c11 / c30;
        r.side = r.branch_coeff > 0 ? 1 : -1;
        return r;
    }
    if (nz(c01) && nz(c20)) {
        r.kind = BifKind::SaddleNode;
        r.branch_coeff = -c01 / c20;
        r.side = r.branch_coeff > 0 ? 1 : -1;
        r.upper_stable = c20 < 0;
        return r;
    }
    if (!nz(c01) && nz(c20)) {
        double disc = c11 * c11 - 4 * c20 * c02;
        if (disc > z * z) {
            r.kind = BifKind::Transcritical;
            double sq = std::sqrt(disc);
            for (double C : {(-c11 + sq) / (2 * c20), (-c11 - sq) / (2 * c20)}) {
                r.slopes.push_back(C);
                r.slope_stable_positive.push_back(2 * c20 * C + c11 < 0);
            }
            return r;
        }
    }
    throw Error(Err::Degenerate, "local coefficients fit no codimension-one case");
}

NewtonPolygon newton_polygon(const CoeffTable& c, double tol) {
    NewtonPolygon np;
    for (const auto& [pq, v] : c) {
        if (std::abs(v) <= tol) continue;
        if (pq.first == 0 && pq.second == 0) throw Error(Err::Usage, "c00 must vanish at the base point");
        np.support.push_back(pq);
    }
    if (np.support.empty()) throw Error(Err::EmptySupport, "no nonzero coefficients");
    // Lower-left hull from the point of least p (least q among those) to the
    // point of least q (least p among those).
    auto A = *std::min_element(np.support.begin(), np.support.end());
    auto B = *std::min_element(np.support.begin(), np.support.end(), [](auto a, auto b) {
        return std::make_pair(a.second, a.first) < std::make_pair(b.second, b.first);
    });
    std::vector<std::pair<int, int>> pts;
    for (auto p : np.support)
        if (p.first >= A.first && p.first <= B.first) pts.push_back(p);
    std::sort(pts.begin(), pts.end());
    // For each p keep the least q.
    std::vector<std::pair<int, int>> col;
    for (auto p : pts)
        if (col.empty() || col.back().first != p.first) col.push_back(p);
    std::vector<std::pair<int, int>> hull;
    auto cross = [](auto o, auto a, auto b) {
        return static_cast<long>(a.first - o.first) * (b.second - o.second) -
               static_cast<long>(a.second - o.second) * (b.first - o.first);
    };
    for (auto p : col) {
        // Drop strictly non-convex turns; collinear points stay.
        while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) < 0) hull.pop_back();
        hull.push_back(p);
    }
    np.vertices = hull;
    std::set<double> mus;
    for (size_t i = 1; i < hull.size(); ++i) {
        PolygonSegment s{hull[i - 1], hull[i], 0.0};
        s.slope = static_cast<double>(hull[i].second - hull[i - 1].second) / (hull[i].first - hull[i - 1].first);
        np.segments.push_back(s);
        if (s.slope < 0) mus.insert(-s.slope);
    }
    np.exponents.assign(mus.begin(), mus.end());
    return np;
}

namespace {

enum class Test { RealFlow, HopfFlow, FoldMap, FlipMap, NsMap };

struct Sample {
    double lambda;
    Vec x;
    Mat J;
    std::vector<cplx> eig;
};

double test_value(Test t, const Mat& J, const std::vector<cplx>& eig, int n) {
    switch (t) {
        case Test::RealFlow: return J.determinant();
        case Test::FoldMap: return (J - Mat::Identity(n, n)).determinant();
        case Test::FlipMap: return (J + Mat::Identity(n, n)).determinant();
        case Test::HopfFlow: {
            double best = 0, bd = 1e300;
            for (cplx e : eig)
                if (e.imag() > 1e-8 && std::abs(e.real()) < bd) {
                    bd = std::abs(e.real());
                    best = e.real();
                }
            return best;
        }
        case Test::NsMap: {
            double best = 0, bd = 1e300;
            for (cplx e : eig)
                if (e.imag() > 1e-8 && std::abs(std::abs(e) - 1) < bd) {
                    bd = std::abs(std::abs(e) - 1);
                    best = std::abs(e) - 1;
                }
            return best;
        }
    }
    return 0;
}

int count_complex(const std::vector<cplx>& eig, Kind kind) {
    int c = 0;
    for (cplx e : eig)
        if (std::abs(e.imag()) > 1e-8 && (kind == Kind::Flow ? e.real() > 0 : std::abs(e) > 1)) ++c;
    return c;
}

struct Refined {
    double lambda;
    Vec x;
    double bracket;
    std::vector<cplx> eig;
};

Refined bisect(const Problem& P, Test t, const BranchPoint& a, const BranchPoint& b) {
    double la = a.lambda, lb = b.lambda;
    Vec xa = a.x, xb = b.x;
    auto value = [&](double l, const Vec& x) {
        SystemDef s = P.at(l);
        Mat J = jacobian_at(s, x);
        return test_value(t, J, sorted_eigenvalues(J), P.n);
    };
    double fa = value(la, xa);
    const double width = 1e-11 * std::max(1.0, std::abs(la));
    for (int it = 0; it < 100 && std::abs(lb - la) > width; ++it) {
        double lm = 0.5 * (la + lb);
        Vec guess = 0.5 * (xa + xb);
        auto x = correct_natural(P, P.at(lm), guess, 1e-12 * std::max(1.0, guess.norm()));
        if (!x) {
            try {
                x = newton_equilibrium(P.at(lm), guess, 1e-12);
            } catch (const Error&) {
                break;
            }
        }
        double fm = value(lm, *x);
        if ((fm > 0) == (fa > 0)) {
            la = lm;
            xa = *x;
            fa = fm;
        } else {
            lb = lm;
            xb = *x;
        }
    }
    Refined r;
    r.lambda = 0.5 * (la + lb);
    r.x = 0.5 * (xa + xb);
    r.bracket = 0.5 * std::abs(lb - la);
    r.eig = sorted_eigenvalues(jacobian_at(P.at(r.lambda), r.x));
    return r;
}

void classify_real(const SystemDef& sys, const std::string& param, BifurcationEvent& ev, bool in_branch) {
    try {
        auto lc = local_taylor_coeffs(sys, param, ev.location, ev.lambda_c);
        SystemDef sc = with_param(difference_flow(sys), param, ev.lambda_c);
        bool sym = odd_symmetry(sc, ev.location, lc.direction).has_value();
        auto lb = classify_local_bif(lc.c, sym);
        ev.kind = lb.kind;
        ev.data = lb.json();
        nlohmann::json cj = nlohmann::json::object();
        for (const auto& [pq, v] : lc.c) cj["c" + std::to_string(pq.first) + std::to_string(pq.second)] = v;
        ev.data["coefficients"] = cj;
        ev.data["symmetric"] = sym;
        ev.data["direction"] = std::vector<double>(lc.direction.data(), lc.direction.data() + lc.direction.size());
        if (in_branch && lb.kind == BifKind::SaddleNode) ev.confidence = 0.5;
    } catch (const Error& e) {
        ev.kind = in_branch ? BifKind::Transcritical : BifKind::SaddleNode;
        ev.data["note"] = std::string("classification failed: ") + e.what();
        ev.confidence = 0.5;
    }
}

}  // namespace

std::vector<BifurcationEvent> detect_bifurcations(const SystemDef& sys, const Continuation& c) {
    Problem P{sys, sys.param_index(c.param), sys.dim};
    const int n = P.n;
    std::vector<BifurcationEvent> out;
    std::vector<Test> tests = sys.kind == Kind::Flow ? std::vector<Test>{Test::RealFlow, Test::HopfFlow}
                                                     : std::vector<Test>{Test::FoldMap, Test::FlipMap, Test::NsMap};
    for (const Branch& br : c.branches) {
        for (size_t i = 1; i < br.points.size(); ++i) {
            const BranchPoint &a = br.points[i - 1], &b = br.points[i];
            Mat Ja = jacobian_at(P.at(a.lambda), a.x), Jb = jacobian_at(P.at(b.lambda), b.x);
            for (Test t : tests) {
                bool hit;
                if (t == Test::HopfFlow || t == Test::NsMap) {
                    int ca = count_complex(a.eigenvalues, sys.kind), cb = count_complex(b.eigenvalues, sys.kind);
                    hit = ca != cb;
                } else {
                    double fa = test_value(t, Ja, a.eigenvalues, n), fb = test_value(t, Jb, b.eigenvalues, n);
                    hit = (fa > 0) != (fb > 0) && fa != 0 && fb != 0;
                }
                if (!hit) continue;
                Refined r = bisect(P, t, a, b);
                BifurcationEvent ev;
                ev.lambda_c = r.lambda;
                ev.location = r.x;
                ev.bracket = r.bracket;
                if (t == Test::RealFlow || t == Test::FoldMap) {
                    classify_real(sys, c.param, ev, true);
                } else if (t == Test::HopfFlow) {
                    ev.kind = BifKind::Hopf;
                    double w = 0;
                    for (cplx e : r.eig)
                        if (e.imag() > 1e-8 && (w == 0 || std::abs(e.real()) < 1e-3)) w = e.imag();
                    const double h = 1e-5 * std::max(1.0, std::abs(r.lambda));
                    double ap = 0;
                    try {
                        auto re_at = [&](double l) {
                            Vec x = newton_equilibrium(P.at(l), r.x, 1e-12);
                            return test_value(t, jacobian_at(P.at(l), x), sorted_eigenvalues(jacobian_at(P.at(l), x)), n);
                        };
                        ap = (re_at(r.lambda + h) - re_at(r.lambda - h)) / (2 * h);
                    } catch (const Error&) {
                        ev.confidence = 0.5;
                    }
                    ev.data = {{"omega", w}, {"a_prime", ap}, {"transversal", std::abs(ap) > 1e-6}};
                } else if (t == Test::FlipMap) {
                    ev.kind = BifKind::Flip;
                    if (n == 1) {
                        try {
                            auto fc = flip_coefficients(sys, c.param, r.x[0], r.lambda, 1e-6);
                            ev.data = {{"c01", fc.c01}, {"c11", fc.c11}, {"c20", fc.c20}, {"c30", fc.c30},
                                       {"schwarzian", fc.schwarzian}, {"supercritical", fc.supercritical},
                                       {"transversal", fc.transversal}, {"nondegenerate", fc.nondegenerate}};
                            if (!fc.nondegenerate || !fc.transversal) ev.confidence = 0.5;
                        } catch (const Error& e) {
                            ev.data["note"] = e.what();
                            ev.confidence = 0.5;
                        }
                    }
                } else {
                    ev.kind = BifKind::NeimarkSacker;
                    cplx mu = 0;
                    double bd = 1e300;
                    for (cplx e : r.eig)
                        if (e.imag() > 1e-8 && std::abs(std::abs(e) - 1) < bd) {
                            bd = std::abs(std::abs(e) - 1);
                            mu = e;
                        }
                    int resonant = 0;
                    for (int j = 1; j <= 4 && !resonant; ++j)
                        if (std::abs(std::pow(mu, j) - 1.0) < 1e-6) resonant = j;
                    ev.data = {{"theta", std::arg(mu) / (2 * M_PI)}, {"strong_resonance", resonant != 0}};
                    if (resonant) {
                        ev.data["resonance_order"] = resonant;
                        ev.confidence = 0.5;
                    }
                }
                out.push_back(std::move(ev));
            }
        }
    }
    for (const FoldPoint& f : c.folds) {
        BifurcationEvent ev;
        ev.lambda_c = f.lambda;
        ev.location = f.x;
        ev.bracket = 1e-12 * std::max(1.0, std::abs(f.lambda));
        classify_real(sys, c.param, ev, false);
        out.push_back(std::move(ev));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.lambda_c < b.lambda_c; });
    return out;
}

nlohmann::json event_json(const BifurcationEvent& e) {
    nlohmann::json j;
    j["kind"] = bif_kind_name(e.kind);
    j["lambda_c"] = e.lambda_c;
    j["location"] = std::vector<double>(e.location.data(), e.location.data() + e.location.size());
    j["data"] = e.data;
    j["confidence"] = e.confidence;
    j["bracket"] = e.bracket;
    return j;
}

nlohmann::json events_json(const std::vector<BifurcationEvent>& es) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : es) j.push_back(event_json(e));
    return j;
}

namespace {

template <class Loop>
Diagram diagram_impl(const SystemDef& sys, const std::string& param, const std::vector<double>& lambdas,
                     const DiagramOptions& opts, Loop loop) {
    if (sys.kind != Kind::Map) throw Error(Err::Usage, "orbit diagrams are defined for maps");
    if (opts.transient < 0 || opts.keep <= 0) throw Error(Err::Usage, "transient and keep must be nonnegative and positive");
    Vec x0 = opts.x0.size() ? opts.x0 : Vec(Vec::Constant(sys.dim, 0.5));
    if (x0.size() != sys.dim) throw Error(Err::DimensionMismatch, "x0 dimension");
    const size_t m = lambdas.size();
    std::vector<std::vector<double>> cells(m);
    std::vector<std::string> notes(m);
    loop(static_cast<int>(m), [&](int i) {
        SystemDef s = with_param(sys, param, lambdas[i]);
        Vec x = x0;
        for (long k = 0; k < opts.transient; ++k) x = evaluate(s, x);
        std::vector<double> v;
        for (long k = 0; k < opts.keep; ++k) {
            x = evaluate(s, x);
            if (!all_finite(x)) {
                notes[i] = "lambda " + fmt_double(lambdas[i]) + " skipped: orbit not finite";
                return;
            }
            v.push_back(x[0]);
        }
        if (!all_finite(x)) {
            notes[i] = "lambda " + fmt_double(lambdas[i]) + " skipped: orbit not finite";
            return;
        }
        cells[i] = std::move(v);
    });
    Diagram d;
    for (size_t i = 0; i < m; ++i) {
        for (double v : cells[i]) d.points.emplace_back(lambdas[i], v);
        if (!notes[i].empty()) d.notes.push_back(notes[i]);
    }
    return d;
}

}  // namespace

Diagram bifurcation_diagram(const SystemDef& sys, const std::string& param, const std::vector<double>& lambdas,
                            const DiagramOptions& opts) {
    return diagram_impl(sys, param, lambdas, opts, [](int m, auto f) { parallel_for(m, f); });
}

Diagram bifurcation_diagram_serial(const SystemDef& sys, const std::string& param,
                                   const std::vector<double>& lambdas, const DiagramOptions& opts) {
    return diagram_impl(sys, param, lambdas, opts, [](int m, auto f) { serial_for(m, f); });
}

std::string diagram_csv(const Diagram& d) {
    std::string s = "lambda,x\n";
    for (const auto& [l, x] : d.points) s += csv_row({l, x});
    return s;
}

}  // namespace dynkit
