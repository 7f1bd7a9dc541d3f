#include "dynkit/normalform.hpp"

#include "dynkit/equilibria.hpp"
#include "dynkit/io.hpp"
#include "dynkit/parallel.hpp"
#include "dynkit/periodic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dynkit {

namespace {

constexpr double two_pi = 2 * std::numbers::pi;

void require_degree(int k) {
    if (k < 2) throw Error(Err::Usage, "homogeneous degree must be at least 2");
}

}  // namespace

ResonanceReport resonances(const std::vector<cplx>& eigs, int k, double tol) {
    require_degree(k);
    const int n = static_cast<int>(eigs.size());
    double scale = 1.0;
    for (cplx a : eigs) scale = std::max(scale, std::abs(a));
    ResonanceReport rep;
    rep.k = k;
    for (const auto& p : monomials_of_degree(n, k)) {
        cplx pa = 0;
        for (int i = 0; i < n; ++i) pa += static_cast<double>(p[i]) * eigs[i];
        for (int j = 0; j < n; ++j) {
            double r = std::abs(pa - eigs[j]);
            if (r <= tol * scale) rep.hits.push_back({j, p, r});
        }
    }
    return rep;
}

ResonanceReport resonances_exact(const std::vector<Rational>& eigs, int k) {
    require_degree(k);
    const int n = static_cast<int>(eigs.size());
    ResonanceReport rep;
    rep.k = k;
    for (const auto& p : monomials_of_degree(n, k)) {
        Rational pa = 0;
        for (int i = 0; i < n; ++i) pa += p[i] * eigs[i];
        for (int j = 0; j < n; ++j)
            if (pa == eigs[j]) rep.hits.push_back({j, p, 0.0});
    }
    return rep;
}

namespace {

template <class S, class M>
std::vector<std::vector<S>> assemble_adk(const M& A, int n, const std::vector<MultiIndex>& basis) {
    const int nb = static_cast<int>(basis.size()), N = nb * n;
    std::map<MultiIndex, int> idx;
    for (int b = 0; b < nb; ++b) idx[basis[b]] = b;
    std::vector<std::vector<S>> L(N, std::vector<S>(N, S(0)));
    for (int b = 0; b < nb; ++b)
        for (int jp = 0; jp < n; ++jp) {
            const int col = b * n + jp;
            const auto& beta = basis[b];
            for (int i = 0; i < n; ++i) {
                if (beta[i] == 0) continue;
                for (int l = 0; l < n; ++l) {
                    S a = A(i, l);
                    if (is_zero(a)) continue;
                    MultiIndex g = beta;
                    g[i] -= 1;
                    g[l] += 1;
                    L[idx[g] * n + jp][col] += S(beta[i]) * a;
                }
            }
            for (int j = 0; j < n; ++j) L[b * n + j][col] -= S(A(j, jp));
        }
    return L;
}

struct RAccess {
    const RMat& A;
    Rational operator()(int i, int j) const { return A[i][j]; }
};

}  // namespace

HomogeneousOperator adk_operator(const CMat& A, int k) {
    require_degree(k);
    HomogeneousOperator op;
    op.k = k;
    op.n = static_cast<int>(A.rows());
    op.basis = monomials_of_degree(op.n, k);
    auto L = assemble_adk<cplx>(A, op.n, op.basis);
    const int N = static_cast<int>(L.size());
    op.matrix.resize(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) op.matrix(i, j) = L[i][j];
    return op;
}

HomogeneousOperator adk_operator(const Mat& A, int k) { return adk_operator(CMat(A.cast<cplx>()), k); }

RMat adk_operator_exact(const RMat& A, int k) {
    require_degree(k);
    const int n = static_cast<int>(A.size());
    return assemble_adk<Rational>(RAccess{A}, n, monomials_of_degree(n, k));
}

// ---------------------------------------------------------------- normal form

namespace {

std::vector<cplx> diagonal_of(const TaylorMap<cplx>& field, double tol) {
    const int n = field.in_dim;
    std::vector<cplx> a(n);
    double scale = 1.0;
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
            MultiIndex e(n, 0);
            e[l] = 1;
            cplx c = field.coeff(e, j);
            scale = std::max(scale, std::abs(c));
            if (j == l) a[j] = c;
        }
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
            if (j == l) continue;
            MultiIndex e(n, 0);
            e[l] = 1;
            if (std::abs(field.coeff(e, j)) > tol * scale)
                throw Error(Err::Usage, "normal_form_step needs a diagonal linear part");
        }
    return a;
}

using CPolys = std::vector<PolyS<cplx>>;

CPolys mat_poly_apply(const std::vector<CPolys>& D, const CPolys& v, int order) {
    const int n = static_cast<int>(v.size());
    CPolys out(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (!D[i][j].empty() && !v[j].empty()) poly_axpy(out[i], cplx(1), poly_mul(D[i][j], v[j], order));
    return out;
}

}  // namespace

NormalFormStep normal_form_step(const TaylorMap<cplx>& field, int k, double tol) {
    require_degree(k);
    const int n = field.in_dim;
    auto a = diagonal_of(field, tol);
    double scale = 1.0;
    for (cplx x : a) scale = std::max(scale, std::abs(x));
    const int order = std::max(field.degree(), k);

    NormalFormStep st;
    st.resonant = TaylorMap<cplx>(n, n);
    st.h = TaylorMap<cplx>(n, n);
    for (const auto& [beta, v] : field.terms) {
        if (mi_degree(beta) != k) continue;
        cplx pa = 0;
        for (int i = 0; i < n; ++i) pa += static_cast<double>(beta[i]) * a[i];
        for (int j = 0; j < n; ++j) {
            if (v[j] == cplx(0)) continue;
            cplx den = pa - a[j];
            if (std::abs(den) <= tol * scale)
                st.resonant.add(beta, j, v[j]);
            else
                st.h.add(beta, j, v[j] / den);
        }
    }

    // New field (I + Dh)^{-1} f(w + h(w)), with the inverse as a finite
    // Neumann series since Dh has no constant term.
    auto hc = st.h.components();
    CPolys inner = identity_polys<cplx>(n);
    for (int i = 0; i < n; ++i) poly_axpy(inner[i], cplx(1), hc[i]);
    CPolys F = poly_compose(field, inner, n, order);
    std::vector<CPolys> D(n, CPolys(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) D[i][j] = poly_diff(hc[i], j);
    CPolys total = F, term = F;
    for (int m = 1; m <= order; ++m) {
        term = mat_poly_apply(D, term, order);
        bool empty = true;
        for (int i = 0; i < n; ++i) {
            poly_axpy(total[i], cplx(m % 2 ? -1.0 : 1.0), term[i]);
            empty = empty && term[i].empty();
        }
        if (empty) break;
    }
    st.field = TaylorMap<cplx>::from_components(n, total);
    return st;
}

std::pair<TaylorMap<cplx>, CMat> to_eigenbasis(const TaylorMap<double>& field) {
    const int n = field.in_dim;
    Mat A(n, n);
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
            MultiIndex e(n, 0);
            e[l] = 1;
            A(j, l) = field.coeff(e, j);
        }
    Eigen::EigenSolver<Mat> es(A);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    auto ev = es.eigenvalues();
    std::sort(order.begin(), order.end(), [&](int x, int y) {
        if (ev[x].real() != ev[y].real()) return ev[x].real() > ev[y].real();
        return ev[x].imag() > ev[y].imag();
    });
    CMat V(n, n);
    for (int c = 0; c < n; ++c) {
        CVec v = es.eigenvectors().col(order[c]);
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        V.col(c) = v / v[imax];
    }
    Eigen::FullPivLU<CMat> lu(V);
    if (lu.rank() < n || lu.rcond() < 1e-10) throw Error(Err::Degenerate, "linear part is not diagonalizable");
    CMat Vinv = lu.inverse();

    std::vector<std::vector<cplx>> M(n, std::vector<cplx>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M[i][j] = V(i, j);
    auto comps = poly_compose(to_complex_map(field), affine_polys(std::vector<cplx>(n, 0.0), M), n, field.degree());
    TaylorMap<cplx> out(n, n);
    for (int j = 0; j < n; ++j) {
        PolyS<cplx> acc;
        for (int i = 0; i < n; ++i) poly_axpy(acc, Vinv(j, i), comps[i]);
        for (const auto& [a, c] : acc)
            if (mi_degree(a) >= 2) out.add(a, j, c);
    }
    for (int j = 0; j < n; ++j) {
        MultiIndex e(n, 0);
        e[j] = 1;
        out.add(e, j, ev[order[j]]);
    }
    return {out, V};
}

NormalForm normal_form(const TaylorMap<double>& field, int order, double tol) {
    NormalForm nf;
    auto [f, V] = to_eigenbasis(field.truncated(order));
    nf.V = V;
    const int n = field.in_dim;
    for (int j = 0; j < n; ++j) {
        MultiIndex e(n, 0);
        e[j] = 1;
        nf.eigenvalues.push_back(f.coeff(e, j));
    }
    for (int k = 2; k <= order; ++k) {
        auto st = normal_form_step(f, k, tol);
        nf.resonant.push_back(st.resonant);
        nf.transforms.push_back(st.h);
        f = st.field.truncated(order);
    }
    nf.field = f;
    return nf;
}

// ---------------------------------------------------------------- maps

NeimarkCoeffs neimark_homological_coeffs(cplx mu, const std::map<std::pair<int, int>, cplx>& c, double tol) {
    cplx pw = 1;
    for (int j = 1; j <= 4; ++j) {
        pw *= mu;
        if (std::abs(pw - 1.0) <= tol)
            throw Error(Err::StrongResonance, "mu^" + std::to_string(j) + " = 1 within tolerance");
    }
    NeimarkCoeffs out;
    for (const auto& [pq, cpq] : c) {
        auto [p, q] = pq;
        if (p + q < 2 || p + q > 3) throw Error(Err::Usage, "homological coefficients are for degrees 2 and 3");
        cplx den = std::pow(mu, p) * std::pow(std::conj(mu), q) - mu;
        if (std::abs(den) <= tol) {
            out.non_removable.push_back(pq);
            continue;
        }
        if (std::abs(den) < 1e-3) out.near_resonant.push_back(pq);
        out.h[pq] = cpq / den;
    }
    return out;
}

NeimarkPolar neimark_polar_coeffs(cplx mu, cplx c) {
    double rho = std::abs(mu), theta = std::arg(mu) / two_pi;
    double psi = std::arg(c) / two_pi;
    NeimarkPolar p;
    p.alpha = std::abs(c) * std::cos(two_pi * (psi - theta));
    p.beta = std::abs(c) / rho * std::sin(two_pi * (psi - theta));
    return p;
}

// ---------------------------------------------------------------- standard map

StandardMapConjugacy standard_map_conjugacy_o1(double omega, double tol) {
    double r = std::fmod(omega, two_pi);
    if (r < 0) r += two_pi;
    if (std::min(r, two_pi - r) <= tol)
        throw Error(Err::SmallDivisor, "e^{i omega} = 1: first-order conjugacy does not exist");
    StandardMapConjugacy s;
    s.omega = omega;
    const cplx I(0, 1), e = std::exp(I * omega);
    s.b1 = 1.0 / (2.0 * I * (1.0 - e));
    s.bm1 = -1.0 / (2.0 * I * (1.0 - std::conj(e)));
    s.a1 = -e / (2.0 * I * (1.0 - e) * (1.0 - e));
    s.am1 = std::conj(e) / (2.0 * I * (1.0 - std::conj(e)) * (1.0 - std::conj(e)));
    return s;
}

double StandardMapConjugacy::f1(double phi) const {
    double s = std::sin(0.5 * omega);
    return std::sin(phi) / (4 * s * s);
}

double StandardMapConjugacy::g1(double phi) const { return std::cos(phi - 0.5 * omega) / (2 * std::sin(0.5 * omega)); }

double StandardMapConjugacy::f1_fourier(double phi) const {
    const cplx I(0, 1);
    return (a1 * std::exp(I * phi) + am1 * std::exp(-I * phi)).real();
}

double StandardMapConjugacy::g1_fourier(double phi) const {
    const cplx I(0, 1);
    return (b1 * std::exp(I * phi) + bm1 * std::exp(-I * phi)).real();
}

const char* hopf_kind_name(HopfKind k) { return k == HopfKind::Supercritical ? "supercritical" : "subcritical"; }

namespace {

HopfSample hunt_cycle(const SystemDef& base, const std::string& param, double lam, const Vec& x_c,
                      const HopfOptions& o) {
    HopfSample smp;
    smp.lambda = lam;
    const auto sys = with_param(base, param, lam);
    const Vec xs = newton_equilibrium(sys, x_c);
    const Mat J = jacobian_at(sys, xs);
    Eigen::ComplexEigenSolver<CMat> es(J.cast<cplx>());
    int pick = -1;
    double max_re = -1e300;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        cplx z = es.eigenvalues()[i];
        max_re = std::max(max_re, z.real());
        if (z.imag() > 1e-8 && (pick < 0 || std::abs(z.real()) < std::abs(es.eigenvalues()[pick].real()))) pick = i;
    }
    if (pick < 0) throw Error(Err::NoCycleFound, "no complex eigenvalue pair at lambda = " + fmt_double(lam));
    smp.equilibrium_stable = max_re < 0;
    const double omega = es.eigenvalues()[pick].imag();
    Vec u = es.eigenvectors().col(pick).real();
    if (u.norm() < 1e-12) u = es.eigenvectors().col(pick).imag();
    u.normalize();

    for (int k = 0; k < o.n_scan; ++k) {
        double s = o.s_max * std::pow(2.0, -0.5 * k);
        PeriodicOrbit orb;
        try {
            orb = find_periodic_orbit(sys, xs + s * u, 2 * std::numbers::pi / omega, o.flow);
        } catch (const Error& e) {
            if (e.kind() == Err::NoConvergence || e.kind() == Err::CollapsedToEquilibrium ||
                e.kind() == Err::StepLimitExceeded || e.kind() == Err::NonFiniteState) {
                // Offsets below the cycle radius fall onto the equilibrium.
                if (smp.found) break;
                continue;
            }
            throw;
        }
        auto tr = trajectory(sys, orb.x0, orb.T, orb.T / 256, o.flow);
        double amp = 0.0;
        for (const auto& x : tr.states) amp = std::max(amp, (x - xs).norm());
        if (amp < 1e-6) continue;
        if (smp.found && amp >= smp.amplitude) continue;
        auto m = monodromy(sys, orb.x0, orb.T, o.flow);
        // Drop the trivial multiplier, judge the rest.
        size_t triv = 0;
        for (size_t i = 1; i < m.multipliers.size(); ++i)
            if (std::abs(m.multipliers[i] - 1.0) < std::abs(m.multipliers[triv] - 1.0)) triv = i;
        bool stable = true;
        for (size_t i = 0; i < m.multipliers.size(); ++i)
            if (i != triv && std::abs(m.multipliers[i]) >= 1.0) stable = false;
        smp.found = true;
        smp.amplitude = amp;
        smp.period = orb.T;
        smp.cycle_stable = stable;
    }
    return smp;
}

}  // namespace

HopfEstimate hopf_sign_estimate(const SystemDef& sys, const std::string& param, double lambda_c, const Vec& x_c,
                                const std::vector<double>& probes, const HopfOptions& opts) {
    if (sys.kind != Kind::Flow) throw Error(Err::Usage, "hopf_sign_estimate needs a flow");
    if (probes.empty()) throw Error(Err::Usage, "hopf_sign_estimate needs probe parameter values");
    HopfEstimate est;
    est.samples.resize(probes.size());
    parallel_for(static_cast<int>(probes.size()),
                 [&](int i) { est.samples[i] = hunt_cycle(sys, param, probes[i], x_c, opts); });

    // Stable cycles where the equilibrium is unstable, or unstable cycles
    // where it is stable.
    std::vector<const HopfSample*> sup, sub;
    for (const auto& s : est.samples) {
        if (!s.found) continue;
        if (s.cycle_stable && !s.equilibrium_stable) sup.push_back(&s);
        if (!s.cycle_stable && s.equilibrium_stable) sub.push_back(&s);
    }
    if (sup.empty() && sub.empty()) throw Error(Err::NoCycleFound, "no cycle branching from the Hopf point was found");
    est.kind = sup.size() >= sub.size() ? HopfKind::Supercritical : HopfKind::Subcritical;
    const auto& use = est.kind == HopfKind::Supercritical ? sup : sub;
    if (use.size() < 2) throw Error(Err::PoorFit, "radius law needs cycles at two or more probes");

    double num = 0, den = 0, mean = 0;
    for (const auto* s : use) {
        double d = std::abs(s->lambda - lambda_c);
        num += s->amplitude * std::sqrt(d);
        den += d;
        mean += s->amplitude;
    }
    est.K = num / den;
    mean /= static_cast<double>(use.size());
    double ss_res = 0, ss_tot = 0;
    for (const auto* s : use) {
        double fit = est.K * std::sqrt(std::abs(s->lambda - lambda_c));
        ss_res += (s->amplitude - fit) * (s->amplitude - fit);
        ss_tot += (s->amplitude - mean) * (s->amplitude - mean);
    }
    est.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
    if (est.r_squared < 0.9)
        throw Error(Err::PoorFit, "radius law fit has R^2 = " + fmt_double(est.r_squared));
    return est;
}

}  // namespace dynkit
