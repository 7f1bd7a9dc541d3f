#include "doctest.h"

#include "dynkit/normalform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace dynkit;

namespace {

constexpr double pi = std::numbers::pi;

// Rank by exact elimination, used as an oracle for kernel dimensions.
int exact_rank(RMat M) {
    const int rows = static_cast<int>(M.size()), cols = rows ? static_cast<int>(M[0].size()) : 0;
    int r = 0;
    for (int c = 0; c < cols && r < rows; ++c) {
        int piv = -1;
        for (int i = r; i < rows; ++i)
            if (M[i][c] != 0) {
                piv = i;
                break;
            }
        if (piv < 0) continue;
        std::swap(M[r], M[piv]);
        for (int i = r + 1; i < rows; ++i) {
            if (M[i][c] == 0) continue;
            Rational f = M[i][c] / M[r][c];
            for (int j = c; j < cols; ++j) M[i][j] -= f * M[r][j];
        }
        ++r;
    }
    return r;
}

bool has_hit(const ResonanceReport& r, int j, const MultiIndex& p) {
    return std::any_of(r.hits.begin(), r.hits.end(), [&](const auto& h) { return h.j == j && h.p == p; });
}

}  // namespace

TEST_CASE("resonance examples") {
    auto r = resonances({2.0, 1.0}, 2);
    REQUIRE(r.hits.size() == 1);
    CHECK(r.hits[0].j == 0);
    CHECK(r.hits[0].p == MultiIndex{0, 2});

    const double w = 1.3;
    std::vector<cplx> hopf{cplx(0, w), cplx(0, -w)};
    CHECK(resonances(hopf, 2).hits.empty());
    auto r3 = resonances(hopf, 3);
    REQUIRE(r3.hits.size() == 2);
    CHECK(has_hit(r3, 0, {2, 1}));
    CHECK(has_hit(r3, 1, {1, 2}));
}

TEST_CASE("adk operator examples") {
    auto op = adk_operator(Mat{{2, 0}, {0, 1}}, 2);
    CHECK(op.matrix.rows() == 6);
    // Basis (2,0), (1,1), (0,2) times components 0, 1; p = (0,2), j = 0 is index 4.
    CHECK(op.basis[2] == MultiIndex{0, 2});
    CHECK(std::abs(op.matrix(4, 4)) == 0.0);
    for (int b = 0; b < 3; ++b)
        for (int j = 0; j < 2; ++j) {
            double want = 2 * op.basis[b][0] + op.basis[b][1] - (j == 0 ? 2 : 1);
            CHECK(op.matrix(b * 2 + j, b * 2 + j).real() == want);
        }
    CHECK((op.matrix - CMat(op.matrix.diagonal().asDiagonal())).norm() == 0.0);
    CHECK(adk_operator(Mat(Mat::Zero(3, 3)), 3).matrix.norm() == 0.0);
}

TEST_CASE("adk spectrum is {p.a - a_j}") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 3;
        Vec d(n);
        for (int i = 0; i < n; ++i) d[i] = n01(rng);
        Mat S(n, n);
        for (int i = 0; i < n * n; ++i) S(i) = n01(rng);
        Mat A = S * d.asDiagonal() * S.inverse();
        for (int k = 2; k <= 3; ++k) {
            auto op = adk_operator(A, k);
            Eigen::ComplexEigenSolver<CMat> es(op.matrix);
            std::vector<double> got, want;
            for (int i = 0; i < es.eigenvalues().size(); ++i) got.push_back(es.eigenvalues()[i].real());
            for (const auto& p : op.basis)
                for (int j = 0; j < n; ++j) {
                    double s = -d[j];
                    for (int i = 0; i < n; ++i) s += p[i] * d[i];
                    want.push_back(s);
                }
            std::sort(got.begin(), got.end());
            std::sort(want.begin(), want.end());
            for (size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-10 * std::max(1.0, S.norm() * S.inverse().norm()));
        }
    }
}

TEST_CASE("exact resonance hits equal the kernel dimension of ad_k A") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> num(-6, 6), den(1, 3), ent(-2, 2);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 2;
        std::vector<Rational> a(n);
        for (auto& x : a) x = Rational(num(rng), den(rng));
        // Force some resonances: a_0 = 2 a_1 in every other trial.
        if (trial % 2 == 0) a[0] = 2 * a[1];
        // A = S D S^{-1} with a unimodular S.
        RMat S = rat_identity(n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) S[i][j] = ent(rng);
        RMat D(n, RVec(n, Rational(0)));
        for (int i = 0; i < n; ++i) D[i][i] = a[i];
        RMat A = rat_mul(rat_mul(S, D), *rat_inverse(S));
        for (int k = 2; k <= 4; ++k) {
            auto hits = resonances_exact(a, k).hits.size();
            RMat L = adk_operator_exact(A, k);
            int N = static_cast<int>(L.size());
            INFO(trial << " k=" << k);
            CHECK(static_cast<int>(hits) == N - exact_rank(L));
            std::vector<cplx> ad(a.size());
            for (int i = 0; i < n; ++i) ad[i] = to_double(a[i]);
            CHECK(resonances(ad, k).hits.size() == hits);
        }
    }
}

TEST_CASE("resonant term survives the normal form step") {
    TaylorMap<cplx> f(2, 2);
    f.add({1, 0}, 0, 2.0);
    f.add({0, 1}, 1, 1.0);
    f.add({0, 2}, 0, 1.0);
    auto st = normal_form_step(f, 2);
    CHECK(st.resonant.coeff({0, 2}, 0) == cplx(1.0));
    CHECK(st.h.terms.empty());

    TaylorMap<cplx> lin(2, 2);
    lin.add({1, 0}, 0, -1.0);
    lin.add({0, 1}, 1, -3.0);
    auto z = normal_form_step(lin, 2);
    CHECK(z.h.terms.empty());
    CHECK(z.resonant.terms.empty());
}

TEST_CASE("hopf normal form keeps only |z|^2 z at cubic order") {
    // Rotation with frequency 1 plus arbitrary quadratic and cubic terms.
    TaylorMap<double> f(2, 2);
    f.add({0, 1}, 0, -1.0);
    f.add({1, 0}, 1, 1.0);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n01;
    for (int k = 2; k <= 3; ++k)
        for (const auto& a : monomials_of_degree(2, k))
            for (int j = 0; j < 2; ++j) f.add(a, j, n01(rng));
    auto nf = normal_form(f, 3);
    for (const auto& [a, v] : nf.field.terms) {
        int d = mi_degree(a);
        for (int j = 0; j < 2; ++j) {
            if (d == 1) continue;
            bool resonant = d == 3 && ((j == 0 && a == MultiIndex{2, 1}) || (j == 1 && a == MultiIndex{1, 2}));
            if (!resonant) CHECK(std::abs(v[j]) <= 1e-10);
        }
    }
    CHECK(std::abs(nf.field.coeff({2, 1}, 0)) > 1e-3);
    CHECK(nf.resonant[0].terms.empty());
    REQUIRE(nf.resonant[1].terms.size() == 2);
}

TEST_CASE("normal form removes all non-resonant terms") {
    TaylorMap<double> f(3, 3);
    double eig[3] = {-1.0, -2.7, 0.6};
    for (int j = 0; j < 3; ++j) {
        MultiIndex e(3, 0);
        e[j] = 1;
        f.add(e, j, eig[j]);
    }
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n01;
    for (int k = 2; k <= 4; ++k)
        for (const auto& a : monomials_of_degree(3, k))
            for (int j = 0; j < 3; ++j) f.add(a, j, 0.3 * n01(rng));
    auto nf = normal_form(f, 4);
    std::vector<cplx> ev(nf.eigenvalues);
    for (int k = 2; k <= 4; ++k) {
        auto hits = resonances(ev, k).hits;
        for (const auto& [a, v] : nf.field.terms) {
            if (mi_degree(a) != k) continue;
            for (int j = 0; j < 3; ++j) {
                bool res = std::any_of(hits.begin(), hits.end(), [&](const auto& h) { return h.j == j && h.p == a; });
                if (!res) CHECK(std::abs(v[j]) <= 1e-10);
            }
        }
    }
}

TEST_CASE("neimark homological coefficients") {
    std::map<std::pair<int, int>, cplx> c;
    for (int p = 0; p <= 3; ++p)
        for (int q = 0; p + q <= 3; ++q)
            if (p + q >= 2) c[{p, q}] = cplx(1.0, 0.5);
    const double th = 0.33;
    cplx mu = std::polar(1.0, 2 * pi * th);
    auto r = neimark_homological_coeffs(mu, c);
    auto is_listed = [](const auto& v, std::pair<int, int> pq) { return std::find(v.begin(), v.end(), pq) != v.end(); };
    CHECK(is_listed(r.non_removable, {2, 1}));
    CHECK(r.non_removable.size() == 1);
    // oracle: |e^{2 pi i th (p - q - 1)} - 1| for (0, 2)
    double small = std::abs(std::exp(cplx(0, 2 * pi * th * (0 - 2 - 1))) - 1.0);
    CHECK(small < 0.1);
    // the near-resonant denominator inflates the (0, 2) coefficient
    CHECK(std::abs(r.h.at({0, 2})) > 10 * std::abs(c.at({0, 2})));
    CHECK(std::abs(r.h.at({2, 0}) * (mu * mu - mu) - c.at({2, 0})) < 1e-12);
    try {
        neimark_homological_coeffs(cplx(0, 1), c);
        FAIL("expected StrongResonance");
    } catch (const Error& e) {
        CHECK(e.kind() == Err::StrongResonance);
    }
}

TEST_CASE("neimark polar coefficients match one step of the map") {
    cplx mu = std::polar(1.01, 2 * pi * 0.2), c(-0.3, 0.7);
    auto pc = neimark_polar_coeffs(mu, c);
    double r = 1e-3;
    cplx z = r, z1 = mu * z + c * std::norm(z) * z;
    double rho = std::abs(mu);
    CHECK(std::abs((std::abs(z1) - rho * r) / (r * r * r) - pc.alpha) < 1e-3);
    double dphi = std::arg(z1) - 2 * pi * 0.2;
    CHECK(std::abs(dphi / (r * r) - pc.beta) < 1e-3);
}

TEST_CASE("standard map first-order conjugacy") {
    auto s = standard_map_conjugacy_o1(pi);
    for (double phi : {0.0, 0.3, 2.0}) {
        CHECK(std::abs(s.f1(phi) - std::sin(phi) / 4) < 1e-15);
        CHECK(std::abs(s.g1(phi) - std::cos(phi - pi / 2) / 2) < 1e-15);
    }
    for (double w : {pi / 2, 0.7, 1.3, pi - 0.3}) {
        auto c = standard_map_conjugacy_o1(w);
        double worst = 0.0;
        for (int i = 0; i < 256; ++i) {
            double phi = 2 * pi * i / 256;
            // f1(phi + w) = f1(phi) + g1(phi + w), g1(phi + w) = g1(phi) - sin phi
            worst = std::max(worst, std::abs(c.f1(phi + w) - c.f1(phi) - c.g1(phi + w)));
            worst = std::max(worst, std::abs(c.g1(phi + w) - c.g1(phi) + std::sin(phi)));
            worst = std::max(worst, std::abs(c.f1_fourier(phi) - c.f1(phi)));
            worst = std::max(worst, std::abs(c.g1_fourier(phi) - c.g1(phi)));
        }
        CHECK(worst <= 1e-12);
    }
    for (double w : {0.0, 1e-12, 2 * pi}) {
        try {
            standard_map_conjugacy_o1(w);
            FAIL("expected SmallDivisor");
        } catch (const Error& e) {
            CHECK(e.kind() == Err::SmallDivisor);
        }
    }
}

TEST_CASE("hopf sign of van der pol is supercritical") {
    auto sys = build_builtin("van_der_pol");
    std::vector<double> probes{0.02, 0.04, 0.06, 0.08, 0.1};
    auto est = hopf_sign_estimate(sys, "lambda", 0.0, Vec::Zero(2), probes);
    CHECK(est.kind == HopfKind::Supercritical);
    CHECK(est.r_squared >= 0.95);
    // oracle: amplitude of a long forward orbit
    for (const auto& s : est.samples) {
        auto tr = trajectory(with_param(sys, "lambda", s.lambda), Vec{{0.1, 0}}, 3000.0, 0.01);
        double amp = 0;
        for (size_t i = tr.states.size() / 2; i < tr.states.size(); ++i) amp = std::max(amp, tr.states[i].norm());
        CHECK(std::abs(amp - s.amplitude) / amp < 1e-3);
    }
}

TEST_CASE("hopf radius law of the radial normal form") {
    auto sys = polynomial_system("radial", Kind::Flow, 2, {{"lambda", 0.0, std::nullopt}},
                                 [](const std::vector<Rational>& p) {
                                     TaylorMap<Rational> f(2, 2);
                                     f.add({1, 0}, 0, p[0]);
                                     f.add({0, 1}, 0, Rational(-1));
                                     f.add({3, 0}, 0, Rational(-1));
                                     f.add({1, 2}, 0, Rational(-1));
                                     f.add({1, 0}, 1, Rational(1));
                                     f.add({0, 1}, 1, p[0]);
                                     f.add({2, 1}, 1, Rational(-1));
                                     f.add({0, 3}, 1, Rational(-1));
                                     return f;
                                 });
    auto est = hopf_sign_estimate(sys, "lambda", 0.0, Vec::Zero(2), {0.01, 0.04, 0.09, 0.16});
    CHECK(est.kind == HopfKind::Supercritical);
    CHECK(std::abs(est.K - 1.0) <= 0.02);
    CHECK_THROWS_AS(hopf_sign_estimate(sys, "lambda", 0.0, Vec::Zero(2), {-0.05, -0.1}), Error);
}

TEST_CASE("lorenz hopf at r = 470/19 is subcritical") {
    auto sys = build_builtin("lorenz");
    const double r3 = 470.0 / 19.0, b = 8.0 / 3.0;
    Vec c{{std::sqrt(b * (r3 - 1)), std::sqrt(b * (r3 - 1)), r3 - 1}};
    auto est = hopf_sign_estimate(sys, "r", r3, c, {r3 - 0.4, r3 - 0.3, r3 - 0.2, r3 - 0.1});
    CHECK(est.kind == HopfKind::Subcritical);
    for (const auto& s : est.samples) CHECK(s.equilibrium_stable);
}
