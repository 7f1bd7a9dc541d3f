#include "dynkit/equilibria.hpp"

#include "dynkit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace dynkit {

const char* stability_name(Stability s) {
    switch (s) {
    case Stability::AsymptoticallyStable: return "asymptotically_stable";
    case Stability::Unstable: return "unstable";
    case Stability::Inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

std::string planar_label(const std::vector<cplx>& e, double zero_tol, const Mat* A) {
    cplx a1 = e[0], a2 = e[1];
    if (std::abs(a1) <= zero_tol || std::abs(a2) <= zero_tol) return "";
    bool complex_pair = std::abs(a1.imag()) > zero_tol;
    if (complex_pair) return std::abs(a1.real()) <= zero_tol ? "center" : "focus";
    double r1 = a1.real(), r2 = a2.real();
    if (r1 * r2 < 0) return "saddle";
    // A Jordan block perturbs a double eigenvalue by O(sqrt(eps)).
    double scale = std::max(1.0, std::max(std::abs(r1), std::abs(r2)));
    if (A && std::abs(r1 - r2) <= 1e-6 * scale) {
        double a = 0.5 * (r1 + r2);
        Mat M = *A - a * Mat::Identity(2, 2);
        Eigen::JacobiSVD<Mat> svd(M);
        double cut = 1e-8 * std::max(1.0, A->norm());
        int rank = 0;
        for (int i = 0; i < 2; ++i)
            if (svd.singularValues()[i] > cut) ++rank;
        return rank == 0 ? "degenerate node" : "improper node";
    }
    return "node";
}

}  // namespace

LinearClass classify_linear(const std::vector<cplx>& eigs, Kind kind, double zero_tol, const Mat* A) {
    LinearClass c;
    for (cplx z : eigs) {
        double s = kind == Kind::Flow ? z.real() : std::abs(z) - 1.0;
        if (s > zero_tol)
            ++c.n_plus;
        else if (s < -zero_tol)
            ++c.n_minus;
        else
            ++c.n_zero;
    }
    if (c.n_plus == 0 && c.n_zero == 0)
        c.label = "sink";
    else if (c.n_minus == 0 && c.n_zero == 0)
        c.label = "source";
    else if (c.n_zero == 0)
        c.label = "hyperbolic";
    else if (c.n_plus == 0 && c.n_minus == 0)
        c.label = "elliptic";
    else
        c.label = "nonhyperbolic";
    if (kind == Kind::Flow && eigs.size() == 2) {
        auto e = eigs;
        std::sort(e.begin(), e.end(), [](cplx a, cplx b) {
            return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
        });
        c.planar = planar_label(e, zero_tol, A);
    }
    return c;
}

StabilityVerdict stability_verdict(const EquilibriumReport& rep) {
    const auto& c = rep.cls;
    if (c.n_plus > 0)
        return {Stability::Unstable, std::to_string(c.n_plus) + " eigenvalue(s) in the unstable region"};
    if (c.n_zero > 0)
        return {Stability::Inconclusive,
                std::to_string(c.n_zero) + " eigenvalue(s) on the boundary; linearization decides nothing, "
                                           "reduce to the center manifold"};
    return {Stability::AsymptoticallyStable, "all eigenvalues in the stable region"};
}

namespace {

Vec residual_of(const SystemDef& sys, const Vec& x) {
    if (sys.kind == Kind::Flow) return evaluate_raw(sys, x);
    return state_difference(sys, evaluate_raw(sys, x), x);
}

Mat residual_jacobian(const SystemDef& sys, const Vec& x) {
    Mat J = jacobian_at(sys, x);
    if (sys.kind == Kind::Map) J -= Mat::Identity(sys.dim, sys.dim);
    return J;
}

}  // namespace

EquilibriumReport analyze_point(const SystemDef& sys, const Vec& x, double zero_tol) {
    EquilibriumReport r;
    r.point = reduce_periodic(sys, x);
    Mat J = jacobian_at(sys, x);
    r.eigenvalues = sorted_eigenvalues(J);
    r.cls = classify_linear(r.eigenvalues, sys.kind, zero_tol, &J);
    r.stability = stability_verdict(r).stability;
    r.residual = residual_of(sys, x).norm();
    return r;
}

Vec newton_equilibrium(const SystemDef& sys, const Vec& seed, double tol) {
    if (!(tol > 0)) throw Error(Err::Usage, "tol must be positive");
    if (seed.size() != sys.dim) throw Error(Err::DimensionMismatch, "seed dimension");
    if (!all_finite(seed)) throw Error(Err::NonFiniteState, "seed is not finite");
    Vec x = seed;
    Vec g = residual_of(sys, x);
    double gn = g.norm();
    for (int it = 0; it < 100; ++it) {
        if (gn <= tol) return x;
        Mat J = residual_jacobian(sys, x);
        Eigen::FullPivLU<Mat> lu(J);
        double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
        if (lu.rank() < sys.dim || std::abs(lu.determinant()) < 1e-14 * std::pow(scale, sys.dim))
            throw Error(Err::SingularJacobian, "singular Jacobian during Newton iteration");
        Vec dx = -lu.solve(g);
        double step = 1.0;
        bool improved = false;
        for (int h = 0; h <= 30; ++h) {
            Vec xn = x + step * dx;
            Vec gt = residual_of(sys, xn);
            if (all_finite(gt) && gt.norm() < gn) {
                x = xn;
                g = gt;
                gn = gt.norm();
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) {
            // Stalled at roundoff level: accept if close enough.
            if (gn <= 10 * tol) return x;
            throw Error(Err::NoConvergence, "damped Newton stalled at residual " + std::to_string(gn));
        }
        if (dx.norm() * step <= 1e-15 * std::max(1.0, x.norm()) && gn <= 10 * tol) return x;
    }
    if (gn <= 10 * tol) return x;
    throw Error(Err::NoConvergence, "Newton did not converge");
}

namespace {

struct SeedOutcome {
    std::optional<Vec> root;
    std::string note;
};

SeedOutcome solve_seed(const SystemDef& sys, const Vec& seed, double tol, int index) {
    SeedOutcome out;
    try {
        out.root = newton_equilibrium(sys, seed, tol);
    } catch (const Error& e) {
        if (e.kind() == Err::SingularJacobian) {
            std::mt19937_64 rng(0x5eed + index);
            std::normal_distribution<double> n01(0.0, 1.0);
            Vec s = seed;
            for (int i = 0; i < s.size(); ++i) s[i] += 1e-3 * std::max(1.0, std::abs(s[i])) * n01(rng);
            try {
                out.root = newton_equilibrium(sys, s, tol);
                return out;
            } catch (const Error& e2) {
                out.note = "seed " + std::to_string(index) + " dropped after retry: " + e2.what();
                return out;
            }
        }
        if (e.kind() == Err::DimensionMismatch || e.kind() == Err::Usage) throw;
        out.note = "seed " + std::to_string(index) + " dropped: " + e.what();
    }
    return out;
}

template <class Loop>
std::vector<EquilibriumReport> find_impl(const SystemDef& sys, const std::vector<Vec>& seeds, double tol,
                                         std::vector<std::string>* notes, Loop loop) {
    if (!(tol > 0)) throw Error(Err::Usage, "tol must be positive");
    for (const auto& s : seeds) {
        if (s.size() != sys.dim) throw Error(Err::DimensionMismatch, "seed dimension");
        if (!all_finite(s)) throw Error(Err::NonFiniteState, "seed is not finite");
    }
    int n = static_cast<int>(seeds.size());
    std::vector<SeedOutcome> outs(n);
    loop(n, [&](int i) { outs[i] = solve_seed(sys, seeds[i], tol, i); });

    std::vector<Vec> roots;
    for (int i = 0; i < n; ++i) {
        if (!outs[i].root) {
            if (notes) notes->push_back(outs[i].note);
            continue;
        }
        Vec r = reduce_periodic(sys, *outs[i].root);
        bool dup = false;
        for (const auto& q : roots)
            if (state_distance(sys, q, r) <= 1e-6) dup = true;
        if (!dup) roots.push_back(r);
    }
    std::sort(roots.begin(), roots.end(), [](const Vec& a, const Vec& b) {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    });
    std::vector<EquilibriumReport> reps;
    for (const auto& r : roots) reps.push_back(analyze_point(sys, r));
    return reps;
}

}  // namespace

std::vector<EquilibriumReport> find_equilibria(const SystemDef& sys, const std::vector<Vec>& seeds, double tol,
                                               std::vector<std::string>* notes) {
    return find_impl(sys, seeds, tol, notes, [](int n, auto&& f) { parallel_for(n, f); });
}

std::vector<EquilibriumReport> find_equilibria_serial(const SystemDef& sys, const std::vector<Vec>& seeds,
                                                      double tol, std::vector<std::string>* notes) {
    return find_impl(sys, seeds, tol, notes, [](int n, auto&& f) { serial_for(n, f); });
}

std::vector<Vec> seed_grid(const Vec& lo, const Vec& hi, int n) {
    int d = static_cast<int>(lo.size());
    std::vector<Vec> out;
    std::vector<int> idx(d, 0);
    while (true) {
        Vec x(d);
        for (int i = 0; i < d; ++i) x[i] = n == 1 ? 0.5 * (lo[i] + hi[i]) : lo[i] + (hi[i] - lo[i]) * idx[i] / (n - 1);
        out.push_back(x);
        int k = 0;
        while (k < d && ++idx[k] == n) idx[k++] = 0;
        if (k == d) break;
    }
    return out;
}

LiapunovCertificate liapunov_certificate(const Mat& A) {
    const int n = static_cast<int>(A.rows());
    if (A.cols() != n) throw Error(Err::DimensionMismatch, "matrix must be square");
    for (cplx z : sorted_eigenvalues(A))
        if (z.real() >= -1e-10) throw Error(Err::NotHurwitz, "eigenvalue with real part " + std::to_string(z.real()));
    // vec(A^T Q + Q A) = (I kron A^T + A^T kron I) vec(Q), column-major vec.
    Mat I = Mat::Identity(n, n);
    Mat K = Mat::Zero(n * n, n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            K.block(i * n, j * n, n, n) += I(i, j) * A.transpose();
            K.block(i * n, j * n, n, n) += A(j, i) * I;
        }
    Vec rhs = -Eigen::Map<const Vec>(I.data(), n * n);
    Vec q = K.fullPivLu().solve(rhs);
    Mat Q = Eigen::Map<Mat>(q.data(), n, n);
    Q = 0.5 * (Q + Q.transpose());
    LiapunovCertificate c;
    c.Q = Q;
    c.residual = (A.transpose() * Q + Q * A + I).norm();
    c.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Mat>(Q).eigenvalues().minCoeff();
    return c;
}

nlohmann::json report_json(const EquilibriumReport& rep) {
    nlohmann::json j;
    j["point"] = std::vector<double>(rep.point.data(), rep.point.data() + rep.point.size());
    auto ev = nlohmann::json::array();
    for (cplx z : rep.eigenvalues) ev.push_back({{"re", z.real()}, {"im", z.imag()}});
    j["eigenvalues"] = ev;
    j["dims"] = {{"plus", rep.cls.n_plus}, {"zero", rep.cls.n_zero}, {"minus", rep.cls.n_minus}};
    j["label"] = rep.cls.planar.empty() ? rep.cls.label : rep.cls.label + "/" + rep.cls.planar;
    j["stability"] = stability_name(rep.stability);
    return j;
}

}  // namespace dynkit
