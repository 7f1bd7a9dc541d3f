// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "examples.hpp"

#include "dynkit/bifurcation.hpp"
#include "dynkit/chaos.hpp"
#include "dynkit/cli.hpp"
#include "dynkit/io.hpp"
#include "dynkit/manifolds.hpp"
#include "dynkit/normalform.hpp"
#include "dynkit/periodic.hpp"
#include "dynkit/symbolic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

using namespace dynkit;

namespace {

constexpr double pi = std::numbers::pi;

// Collects the first few failed conditions of one criterion.
struct Ledger {
    std::vector<std::string> failed;
    void check(bool ok, const std::string& what) {
        if (!ok) failed.push_back(what);
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void c1(Ledger& L) {
    auto r = period_doubling_cascade(build_builtin("logistic"), "lambda", 6);
    L.check(r.lambdas.size() == 6 && r.deltas.size() == 4, "cascade length");
    if (!L.failed.empty()) return;
    L.check(std::abs(r.lambdas[0] - 3) <= 1e-8, "lambda1 " + fmt("%.12g", r.lambdas[0]));
    L.check(std::abs(r.lambdas[1] - (1 + std::sqrt(6.0))) <= 1e-6, "lambda2 " + fmt("%.12g", r.lambdas[1]));
    L.check(std::abs(r.deltas[3] - 4.669) <= 0.05 * 4.669, "delta5 " + fmt("%.6g", r.deltas[3]));
    L.check(std::abs(r.accumulation_estimate - 3.56) <= 1e-2, "accumulation " + fmt("%.6g", r.accumulation_estimate));
}

void c2(Ledger& L) {
    std::vector<Vec> pts;
    for (double x : cantor_endpoints(10)) pts.push_back(Vec::Constant(1, x));
    auto d = box_dimension(pts, geometric_ladder(3.0, 2, 7));
    const double d0 = std::log(2.0) / std::log(3.0);
    L.check(std::abs(d.slope - d0) <= 0.02 * d0, "slope " + fmt("%.6g", d.slope));
}

void c3(Ledger& L) {
    auto sys = build_builtin("lorenz");
    const double b = 8.0 / 3.0;
    auto origin = continue_branch(sys, "r", Vec::Zero(3), 0.5, 2.0);
    bool pf = false;
    for (const auto& e : detect_bifurcations(sys, origin))
        if (e.kind == BifKind::Pitchfork && std::abs(e.lambda_c - 1) <= 1e-4) pf = true;
    L.check(pf, "pitchfork at r = 1");

    for (double r : {2.0, 13.0, 28.0}) {
        auto eqs = find_equilibria(build_builtin("lorenz", {{"r", r}}),
                                   seed_grid(Vec{{-20, -20, 0}}, Vec{{20, 20, 40}}, 4));
        const double s = std::sqrt(b * (r - 1));
        int hits = 0;
        for (const auto& e : eqs)
            if ((e.point - Vec{{s, s, r - 1}}).norm() <= 1e-8 || (e.point - Vec{{-s, -s, r - 1}}).norm() <= 1e-8) ++hits;
        L.check(hits == 2, "C+- at r = " + fmt("%g", r));
    }

    auto cp = [&](double r) {
        double s = std::sqrt(b * (r - 1));
        return Vec{{s, s, r - 1}};
    };
    const double r3 = 470.0 / 19.0;
    auto branch = continue_branch(sys, "r", cp(2.0), 2.0, 26.0, {.step = 0.1});
    bool hopf = false;
    for (const auto& e : detect_bifurcations(sys, branch))
        if (e.kind == BifKind::Hopf && std::abs(e.lambda_c - r3) / r3 <= 1e-3) hopf = true;
    L.check(hopf, "hopf at 470/19");
    auto est = hopf_sign_estimate(sys, "r", r3, cp(r3), {r3 - 0.4, r3 - 0.3, r3 - 0.2, r3 - 0.1});
    L.check(est.kind == HopfKind::Subcritical, "hopf criticality");

    for (double r : {0.1, 0.5, 0.9}) {
        auto lz = build_builtin("lorenz", {{"r", r}});
        for (const Vec& x0 : {Vec{{1, 1, 1}}, Vec{{-5, 3, 10}}, Vec{{10, -10, 20}}}) {
            Vec x = flow_to(lz, x0, 100.0);
            L.check(x.norm() < 1e-4, "decay at r = " + fmt("%g", r));
        }
    }
}

void c4(Ledger& L) {
    SpectrumOptions o;
    o.T = 20;
    auto d = lyapunov_spectrum(linear_system(Mat{{2, 0}, {0, -1}}), Vec::Zero(2), o);
    L.check(std::abs(d.exponents[0] - 2) <= 1e-5 && std::abs(d.exponents[1] + 1) <= 1e-5, "linear diagonal");
    auto f = lyapunov_spectrum(linear_system(Mat{{-1, 3}, {-3, -1}}), Vec{{1, 0}}, o);
    L.check(std::abs(f.exponents[0] + 1) <= 1e-5 && std::abs(f.exponents[1] + 1) <= 1e-5, "linear focus");

    SpectrumOptions m;
    m.N = 10000;
    auto t = lyapunov_spectrum(build_builtin("tent"), Vec{{0.1234}}, m);
    L.check(std::abs(t.exponents[0] - std::log(2.0)) <= 1e-3, "tent " + fmt("%.6g", t.exponents[0]));

    auto lorenz = build_builtin("lorenz");
    SpectrumOptions lo;
    lo.T = 2000;
    auto lz = lyapunov_spectrum(lorenz, flow_to(lorenz, Vec{{1, 1, 1}}, 50.0), lo);
    const double div = -41.0 / 3.0;
    L.check(lz.exponents[0] > 0 && std::abs(lz.exponents[1]) <= 0.02 && lz.exponents[2] < 0,
            "lorenz pattern " + fmt("%.4g", lz.exponents[0]) + fmt(" %.4g", lz.exponents[1]) +
                fmt(" %.4g", lz.exponents[2]));
    L.check(std::abs(lz.sum - div) <= 0.02 * std::abs(div), "lorenz sum " + fmt("%.6g", lz.sum));

    auto h = henon_attractor_experiment(1.4, 0.3, 100000, 1000);
    L.check(std::abs(h.spectrum.sum - std::log(0.3)) <= 0.01 * std::abs(std::log(0.3)),
            "henon sum " + fmt("%.6g", h.spectrum.sum));
    L.check(h.spectrum.exponents[0] > 0.25, "henon lambda1 " + fmt("%.6g", h.spectrum.exponents[0]));
}

void c5(Ledger& L) {
    FlowOptions tight;
    tight.abs_tol = tight.rel_tol = 1e-12;
    auto vdp = build_builtin("van_der_pol");
    auto orb = find_periodic_orbit(vdp, Vec{{2, 0}}, 6.5, tight);
    auto mono = monodromy(vdp, orb.x0, orb.T, tight);
    double best = 1e9;
    for (cplx m : mono.multipliers) best = std::min(best, std::abs(m - 1.0));
    L.check(best <= 1e-4, "trivial multiplier " + fmt("%.3g", best));

    std::vector<double> Ts, Ws;
    for (int i = 0; i < 10; ++i) {
        Ts.push_back(0.5 + (pi - 0.5) * i / 9);
        Ws.push_back(0.2 + 2.8 * i / 9);
    }
    double worst = 0, det = 0;
    for (const auto& g : hill_grid(Ts, Ws)) {
        worst = std::max(worst, g.max_entry_diff);
        det = std::max(det, g.det_error);
    }
    L.check(worst <= 1e-8, "hill entries " + fmt("%.3g", worst));
    L.check(det <= 1e-12, "hill det " + fmt("%.3g", det));
}

void c6(Ledger& L) {
    auto coeff = [](const TaylorMapPoly& p, int d) { return p.exact->coeff(MultiIndex{d}, 0); };
    auto u = local_manifold_taylor(testsys::unstable_graph_example(), Vec::Zero(2), ManifoldKind::Unstable, 4);
    L.check(u.exact() && coeff(u.h, 2) == Rational(1, 3), "unstable graph 1/3");

    for (Rational c : {Rational(0), Rational(1, 2), Rational(1), Rational(2)}) {
        auto g = local_manifold_taylor(testsys::cm_example(to_double(c)), Vec::Zero(2), ManifoldKind::Center, 4);
        if (!g.exact()) {
            L.check(false, "center graph not exact");
            continue;
        }
        L.check(coeff(g.h, 2) == c && coeff(g.h, 3) == 0 && coeff(g.h, 4) == -2 * c * (c - 1), "center graph");
        auto red = reduced_dynamics(g, 5);
        L.check(red.exact && coeff(red, 3) == c - 1 && coeff(red, 5) == -2 * c * (c - 1) && coeff(red, 4) == 0,
                "reduced field");
    }

    auto sys = testsys::cm_example(0.5);
    auto g = local_manifold_taylor(sys, Vec::Zero(2), ManifoldKind::Center, 4);
    double slope = std::log(verify_invariance(sys, g, 1e-2, 16) / verify_invariance(sys, g, 5e-3, 16)) / std::log(2.0);
    L.check(slope >= 4.5, "residual slope " + fmt("%.3g", slope));
}

// Rank by exact elimination, for kernel dimensions of ad_k A.
int exact_rank(RMat M) {
    const int rows = static_cast<int>(M.size()), cols = rows ? static_cast<int>(M[0].size()) : 0;
    int r = 0;
    for (int c = 0; c < cols && r < rows; ++c) {
        int piv = -1;
        for (int i = r; i < rows && piv < 0; ++i)
            if (M[i][c] != 0) piv = i;
        if (piv < 0) continue;
        std::swap(M[r], M[piv]);
        for (int i = r + 1; i < rows; ++i) {
            if (M[i][c] == 0) continue;
            Rational q = M[i][c] / M[r][c];
            for (int j = c; j < cols; ++j) M[i][j] -= q * M[r][j];
        }
        ++r;
    }
    return r;
}

void c7(Ledger& L) {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> num(-6, 6), den(1, 3), ent(-2, 2);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 2;
        std::vector<Rational> a(n);
        for (auto& x : a) x = Rational(num(rng), den(rng));
        if (trial % 2 == 0) a[0] = 2 * a[1];
        RMat S = rat_identity(n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) S[i][j] = ent(rng);
        RMat D(n, RVec(n, Rational(0)));
        for (int i = 0; i < n; ++i) D[i][i] = a[i];
        RMat A = rat_mul(rat_mul(S, D), *rat_inverse(S));
        for (int k = 2; k <= 4; ++k) {
            // zero eigenvalues p.a - a_j of ad_k A
            long zeros = 0;
            for (const auto& p : monomials_of_degree(n, k))
                for (int j = 0; j < n; ++j) {
                    Rational s = -a[j];
                    for (int i = 0; i < n; ++i) s += p[i] * a[i];
                    if (s == 0) ++zeros;
                }
            auto hits = static_cast<long>(resonances_exact(a, k).hits.size());
            RMat Lk = adk_operator_exact(A, k);
            long kernel = static_cast<long>(Lk.size()) - exact_rank(Lk);
            L.check(hits == zeros && kernel == zeros, "resonances trial " + std::to_string(trial));
        }
    }

    // rotation plus every quadratic and cubic monomial
    TaylorMap<double> f(2, 2);
    f.add({0, 1}, 0, -1.0);
    f.add({1, 0}, 1, 1.0);
    std::normal_distribution<double> n01;
    for (int k = 2; k <= 3; ++k)
        for (const auto& m : monomials_of_degree(2, k))
            for (int j = 0; j < 2; ++j) f.add(m, j, n01(rng));
    auto nf = normal_form(f, 3);
    bool only_cubic = nf.resonant[0].terms.empty() && nf.resonant[1].terms.size() == 2;
    for (const auto& [m, v] : nf.resonant[1].terms) {
        (void)v;
        only_cubic = only_cubic && (m == MultiIndex{2, 1} || m == MultiIndex{1, 2});
    }
    L.check(only_cubic, "hopf resonant set");

    for (double w : {pi / 2, 0.7, 1.3}) {
        auto c = standard_map_conjugacy_o1(w);
        double worst = 0;
        for (int i = 0; i < 256; ++i) {
            double phi = 2 * pi * i / 256;
            worst = std::max(worst, std::abs(c.f1(phi + w) - c.f1(phi) - c.g1(phi + w)));
            worst = std::max(worst, std::abs(c.g1(phi + w) - c.g1(phi) + std::sin(phi)));
        }
        L.check(worst <= 1e-12, "conjugacy residual " + fmt("%.3g", worst));
    }
    bool small = false;
    try {
        standard_map_conjugacy_o1(0.0);
    } catch (const Error& e) {
        small = e.kind() == Err::SmallDivisor;
    }
    L.check(small, "SmallDivisor at omega = 0");
}

void c8(Ledger& L) {
    for (int p = 1; p <= 10; ++p) {
        auto pts = enumerate_periodic_tent(p);
        bool ok = pts.size() == (size_t{1} << p);
        for (const auto& pt : pts) {
            Rational y = pt.x;
            for (int k = 0; k < p; ++k) y = tent2(y);
            ok = ok && pt.verified && y == pt.x;
        }
        L.check(ok, "periodic points p = " + std::to_string(p));
    }

    std::mt19937_64 rng(7);
    std::uniform_int_distribution<long long> den(1, 1000000007LL);
    const Rational w = Rational(1, BigInt(1) << 40);
    bool bracket = true;
    for (int i = 0; i < 1000; ++i) {
        long long q = den(rng);
        Rational x(std::uniform_int_distribution<long long>(0, q)(rng), q);
        auto iv = itinerary_to_point(tent_itinerary(x, 40));
        bracket = bracket && iv.lo <= x && x <= iv.hi && iv.hi - iv.lo == w;
    }
    L.check(bracket, "itinerary brackets");

    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        double x = i / 999.0;
        worst = std::max(worst, std::abs(tent_to_logistic(tent2(x)) - logistic4(tent_to_logistic(x))));
    }
    L.check(worst <= 1e-12, "conjugacy " + fmt("%.3g", worst));

    const Rational lam(1, 3), mu(5, 2);
    bool sizes = true;
    for (int m = 0; m <= 4; ++m)
        for (int n = 1; n <= 4; ++n) {
            auto r = horseshoe_rectangle(std::string(m, '+') + "," + std::string(n, '-'), lam, mu);
            Rational wd = 1, ht = 1;
            for (int i = 0; i < m; ++i) wd *= lam;
            for (int i = 0; i < n; ++i) ht /= mu;
            sizes = sizes && r.width == wd && r.height == ht;
        }
    L.check(sizes, "horseshoe sizes");

    auto m1 = tent_ergodic_average_sqrt2([](double x) { return x; }, 1000000, 0.5);
    auto m2 = tent_ergodic_average_sqrt2([](double x) { return x * x; }, 1000000, 1.0 / 3);
    L.check(m1.within_3se(), "mean of x " + fmt("%.6g", m1.mean));
    L.check(m2.within_3se(), "mean of x^2 " + fmt("%.6g", m2.mean));
}

void c9(Ledger& L) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-3, 3);
    std::vector<Vec> s2, s3;
    for (int k = 0; k < 20; ++k) {
        s2.push_back(Vec{{u(rng), u(rng)}});
        s3.push_back(Vec{{u(rng), u(rng), 10 + u(rng)}});
    }
    auto sm = build_builtin("standard_map");
    double det = 0;
    for (const Vec& x : s2) det = std::max(det, std::abs(jacobian_at(sm, x).determinant() - 1));
    L.check(det <= 1e-12 && conservativity_report(sm, s2).verdict == Conservativity::Conservative,
            "standard map det " + fmt("%.3g", det));

    auto lz = build_builtin("lorenz");
    auto dv = exact_divergence(lz);
    L.check(dv && dv->terms.size() == 1 && dv->coeff(MultiIndex{0, 0, 0}, 0) == Rational(-41, 3), "lorenz div");
    L.check(conservativity_report(lz, s3).verdict == Conservativity::Dissipative, "lorenz verdict");

    for (double b : {0.3, -0.5, 0.9}) {
        auto h = build_builtin("henon", {{"b", b}});
        L.check(conservativity_report(h, s2).verdict == Conservativity::Dissipative, "henon b = " + fmt("%g", b));
    }
    L.check(conservativity_report(build_builtin("henon", {{"b", 1.0}}), s2).verdict != Conservativity::Dissipative,
            "henon b = 1");
}

void c10(Ledger& L) {
    namespace fs = std::filesystem;
    int n = 0;
    for (const auto& e : fs::directory_iterator(DYNKIT_GOLDEN_DIR)) {
        if (e.path().extension() != ".json") continue;
        auto cfg = validate_config(read_file(e.path().string()));
        std::string a = execute(cfg), b = execute(cfg);
        fs::path out = e.path();
        out.replace_extension(".out");
        L.check(a == b && a == read_file(out.string()), e.path().stem().string());
        ++n;
    }
    L.check(n > 0, "no golden configs");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;  // 0: no runtime bound stated
        std::function<void(Ledger&)> run;
    };
    const std::vector<Criterion> all = {
        {1, "feigenbaum cascade", 60, c1},  {2, "cantor dimension", 5, c2},     {3, "lorenz bifurcations", 120, c3},
        {4, "liapunov spectra", 120, c4},   {5, "floquet", 30, c5},             {6, "manifold exactness", 10, c6},
        {7, "normal forms", 0, c7},         {8, "symbolic dynamics", 0, c8},    {9, "conservativity", 0, c9},
        {10, "determinism", 0, c10},
    };
    int failures = 0;
    for (const auto& c : all) {
        Ledger L;
        auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(L);
        } catch (const std::exception& e) {
            L.check(false, std::string("threw: ") + e.what());
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0) L.check(secs < c.budget_s, "runtime " + fmt("%.1f s", secs));
        bool ok = L.failed.empty();
        failures += !ok;
        std::printf("criterion %2d %-20s %s  %.1fs", c.id, c.name, ok ? "PASS" : "FAIL", secs);
        for (size_t i = 0; i < L.failed.size() && i < 3; ++i) std::printf("  [%s]", L.failed[i].c_str());
        std::printf("\n");
        std::fflush(stdout);
    }
    return failures ? 1 : 0;
}
