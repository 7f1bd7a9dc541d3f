#include "doctest.h"

#include "dynkit/bifurcation.hpp"

#include <cmath>
#include <random>

using namespace dynkit;

namespace {

// x' = a lambda + b x^2 + c x^3 + d lambda x
SystemDef scalar_family(int a, int b, int c = 0, int d = 0) {
    return polynomial_system("scalar", Kind::Flow, 1, {{"lambda", 0.0, std::nullopt}},
                             [=](const std::vector<Rational>& p) {
                                 TaylorMap<Rational> f(1, 1);
                                 f.add({0}, 0, Rational(a) * p[0]);
                                 f.add({1}, 0, Rational(d) * p[0]);
                                 f.add({2}, 0, Rational(b));
                                 f.add({3}, 0, Rational(c));
                                 return f;
                             });
}

// (x, y) -> (y, lambda y (1 - x))
SystemDef delayed_logistic() {
    return polynomial_system("delayed_logistic", Kind::Map, 2, {{"lambda", 1.5, std::nullopt}},
                             [](const std::vector<Rational>& p) {
                                 TaylorMap<Rational> f(2, 2);
                                 f.add({0, 1}, 0, Rational(1));
                                 f.add({0, 1}, 1, p[0]);
                                 f.add({1, 1}, 1, -p[0]);
                                 return f;
                             });
}

const BifurcationEvent* find_kind(const std::vector<BifurcationEvent>& es, BifKind k) {
    for (const auto& e : es)
        if (e.kind == k) return &e;
    return nullptr;
}

}  // namespace

TEST_CASE("continuation rounds a fold and recovers both half-branches") {
    auto sys = scalar_family(1, -1);
    auto c = continue_branch(sys, "lambda", Vec{{1.0}}, 1.0, -0.5);
    REQUIRE(c.folds.size() == 1);
    CHECK(std::abs(c.folds[0].lambda) <= 1e-8);
    REQUIRE(c.branches.size() == 2);
    int pos = 0, neg = 0;
    for (const auto& br : c.branches)
        for (const auto& p : br.points) {
            CHECK(p.lambda >= -1e-12);
            CHECK(std::abs(std::abs(p.x[0]) - std::sqrt(std::max(0.0, p.lambda))) <= 1e-8);
            (p.x[0] > 0 ? pos : neg)++;
        }
    CHECK(pos > 10);
    CHECK(neg > 10);
    CHECK(c.branches[1].points.back().lambda == doctest::Approx(1.0));
    // upper half attracts, lower repels
    CHECK(c.branches[0].points.front().stability == Stability::AsymptoticallyStable);
    CHECK(c.branches[1].points.back().stability == Stability::Unstable);

    auto ev = detect_bifurcations(sys, c);
    auto sn = find_kind(ev, BifKind::SaddleNode);
    REQUIRE(sn != nullptr);
    CHECK(sn->data["direct"] == true);
    CHECK(sn->data["upper_stable"] == true);
}

TEST_CASE("lorenz origin branch has a symmetric supercritical pitchfork at r = 1") {
    auto sys = build_builtin("lorenz");
    auto c = continue_branch(sys, "r", Vec::Zero(3), 0.5, 2.0);
    REQUIRE(c.branches.size() == 1);
    for (const auto& p : c.branches[0].points) CHECK(p.x.norm() <= 1e-12);
    auto ev = detect_bifurcations(sys, c);
    auto pf = find_kind(ev, BifKind::Pitchfork);
    REQUIRE(pf != nullptr);
    CHECK(std::abs(pf->lambda_c - 1.0) <= 1e-4);
    CHECK(pf->data["symmetric"] == true);
    CHECK(pf->data["supercritical"] == true);

    auto lc = local_taylor_coeffs(sys, "r", Vec::Zero(3), 1.0);
    CHECK(lc.exact.has_value());
    // odd in u under the symmetry
    for (auto [pq, v] : lc.c)
        if (pq.first % 2 == 0) CHECK(std::abs(v) <= 1e-10);
    CHECK(lc.c[{3, 0}] < 0);
    CHECK(lc.c[{1, 1}] > 0);
    // the critical direction is the kernel (1, 1, 0) of the Jacobian
    CHECK((lc.direction - Vec{{1, 1, 0}}).norm() <= 1e-12);
}

TEST_CASE("lorenz C+ branch follows the closed form and loses stability at the hopf point") {
    auto sys = build_builtin("lorenz");
    const double b = 8.0 / 3.0;
    auto cp = [&](double r) {
        double s = std::sqrt(b * (r - 1));
        return Vec{{s, s, r - 1}};
    };
    auto c = continue_branch(sys, "r", cp(2.0), 2.0, 26.0, {.step = 0.1});
    REQUIRE(c.branches.size() == 1);
    REQUIRE(c.branches[0].points.back().lambda == doctest::Approx(26.0));
    for (const auto& p : c.branches[0].points) CHECK((p.x - cp(p.lambda)).norm() <= 1e-6);
    auto ev = detect_bifurcations(sys, c);
    auto h = find_kind(ev, BifKind::Hopf);
    REQUIRE(h != nullptr);
    const double r3 = 470.0 / 19.0;
    CHECK(std::abs(h->lambda_c - r3) / r3 <= 1e-3);
    CHECK(h->data["a_prime"].get<double>() > 0);
    CHECK(h->data["transversal"] == true);
    CHECK(h->data["omega"].get<double>() > 0);
}

TEST_CASE("van der pol origin has a hopf point at lambda = 0 with unit frequency") {
    auto sys = build_builtin("van_der_pol");
    auto c = continue_branch(sys, "lambda", Vec::Zero(2), -1.0, 1.0, {.step = 0.07});
    auto ev = detect_bifurcations(sys, c);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].kind == BifKind::Hopf);
    CHECK(std::abs(ev[0].lambda_c) <= 1e-10);
    CHECK(ev[0].data["omega"].get<double>() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(ev[0].data["a_prime"].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("logistic fixed-point branch flips at lambda = 3") {
    auto sys = build_builtin("logistic");
    auto c = continue_branch(sys, "lambda", Vec{{0.5}}, 2.0, 3.5);
    REQUIRE(c.branches.size() == 1);
    for (const auto& p : c.branches[0].points) CHECK(std::abs(p.x[0] - (1 - 1 / p.lambda)) <= 1e-12);
    auto ev = detect_bifurcations(sys, c);
    auto f = find_kind(ev, BifKind::Flip);
    REQUIRE(f != nullptr);
    CHECK(std::abs(f->lambda_c - 3.0) <= 1e-8);
    CHECK(f->data["supercritical"] == true);
    CHECK(f->data["schwarzian"].get<double>() < 0);
    // the bracket straddles a sign change of det(DF + I) = 2 - lambda
    CHECK((2 - (f->lambda_c - f->bracket) + 1) * (2 - (f->lambda_c + f->bracket) + 1) <= 0);
    CHECK(f->bracket <= 1e-10);
    auto j = events_json(ev);
    CHECK(j[0]["kind"] == "flip");
    CHECK(j[0].contains("confidence"));
}

TEST_CASE("delayed logistic map has a neimark-sacker point at lambda = 2") {
    auto sys = delayed_logistic();
    auto c = continue_branch(sys, "lambda", Vec{{1.0 / 3, 1.0 / 3}}, 1.5, 2.5);
    auto ev = detect_bifurcations(sys, c);
    auto ns = find_kind(ev, BifKind::NeimarkSacker);
    REQUIRE(ns != nullptr);
    CHECK(std::abs(ns->lambda_c - 2.0) <= 1e-8);
    CHECK(ns->data["theta"].get<double>() == doctest::Approx(1.0 / 6).epsilon(1e-6));
    CHECK(ns->data["strong_resonance"] == false);
}

TEST_CASE("saddle-node sign cases agree with the equilibrium solver") {
    for (int a : {-1, 1})
        for (int b : {-1, 1}) {
            auto sys = scalar_family(a, b, 1);
            auto lc = local_taylor_coeffs(sys, "lambda", Vec::Zero(1), 0.0);
            CHECK(lc.c[{0, 1}] == a);
            CHECK(lc.c[{2, 0}] == b);
            auto lb = classify_local_bif(lc.c, false);
            REQUIRE(lb.kind == BifKind::SaddleNode);
            CHECK(lb.side == -a * b);
            for (double lam : {1e-3, 3e-4}) {
                double l = lb.side * lam;
                double u = std::sqrt(lb.branch_coeff * l);
                auto s = with_param(sys, "lambda", l);
                auto found = find_equilibria(s, seed_grid(Vec{{-0.2}}, Vec{{0.2}}, 41));
                int matched = 0;
                for (const auto& r : found) {
                    double x = r.point[0];
                    if (std::abs(x) > 0.2) continue;
                    double pred = x > 0 ? u : -u;
                    CHECK(std::abs(x - pred) <= 0.05 * u);
                    bool stable = r.stability == Stability::AsymptoticallyStable;
                    CHECK(stable == (x > 0 ? lb.upper_stable : !lb.upper_stable));
                    ++matched;
                }
                CHECK(matched == 2);
                // nothing on the other side
                auto other = find_equilibria(with_param(sys, "lambda", -l), seed_grid(Vec{{-0.2}}, Vec{{0.2}}, 41));
                for (const auto& r : other) CHECK(std::abs(r.point[0]) > 0.2);
            }
        }
}

TEST_CASE("transcritical and pitchfork normal forms") {
    auto tc = classify_local_bif({{{1, 1}, 1.0}, {{2, 0}, -1.0}}, false);
    REQUIRE(tc.kind == BifKind::Transcritical);
    REQUIRE(tc.slopes.size() == 2);
    // x = 0 and x = lambda; the second attracts for lambda > 0
    for (size_t i = 0; i < 2; ++i) {
        double C = tc.slopes[i];
        CHECK((std::abs(C) <= 1e-14 || std::abs(C - 1) <= 1e-14));
        CHECK(tc.slope_stable_positive[i] == (C > 0.5));
    }
    auto pf = classify_local_bif({{{1, 1}, 1.0}, {{3, 0}, -1.0}}, false);
    CHECK(pf.kind == BifKind::Pitchfork);
    CHECK(pf.supercritical);
    CHECK(pf.side == 1);
    auto sub = classify_local_bif({{{1, 1}, 1.0}, {{3, 0}, 1.0}}, false);
    CHECK_FALSE(sub.supercritical);
    CHECK(sub.side == -1);
    try {
        classify_local_bif({{{0, 1}, 1.0}}, false);
        FAIL("expected Degenerate");
    } catch (const Error& e) {
        CHECK(e.kind() == Err::Degenerate);
    }
    // the flow x' = lambda x - x^2 reduces to the same coefficients
    auto lc = local_taylor_coeffs(scalar_family(0, -1, 0, 1), "lambda", Vec::Zero(1), 0.0);
    CHECK(lc.c[{1, 1}] == 1.0);
    CHECK(lc.c[{2, 0}] == -1.0);
}

TEST_CASE("newton polygon examples") {
    auto sn = newton_polygon({{{0, 1}, 1.0}, {{2, 0}, -1.0}});
    REQUIRE(sn.segments.size() == 1);
    CHECK(sn.segments[0].slope == -0.5);
    REQUIRE(sn.exponents.size() == 1);
    CHECK(sn.exponents[0] == 0.5);

    auto tc = newton_polygon({{{0, 2}, 1.0}, {{1, 1}, 1.0}, {{2, 0}, -1.0}});
    CHECK(tc.vertices == std::vector<std::pair<int, int>>{{0, 2}, {1, 1}, {2, 0}});
    REQUIRE(tc.exponents.size() == 1);
    CHECK(tc.exponents[0] == 1.0);

    auto mono = newton_polygon({{{3, 0}, 1.0}});
    CHECK(mono.segments.empty());
    CHECK(mono.exponents.empty());

    CHECK_THROWS_AS(newton_polygon({{{0, 0}, 1.0}, {{1, 0}, 1.0}}), Error);
    try {
        newton_polygon({{{1, 1}, 0.0}});
        FAIL("expected EmptySupport");
    } catch (const Error& e) {
        CHECK(e.kind() == Err::EmptySupport);
    }
}

TEST_CASE("newton polygon lies below its support") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> deg(0, 6);
    for (int trial = 0; trial < 300; ++trial) {
        CoeffTable c;
        int m = 1 + trial % 7;
        for (int k = 0; k < m; ++k) {
            int p = deg(rng), q = deg(rng);
            if (p + q == 0) q = 1;
            c[{p, q}] = 1.0;
        }
        auto np = newton_polygon(c);
        REQUIRE(!np.vertices.empty());
        for (auto [p, q] : np.support) {
            if (p < np.vertices.front().first) CHECK(false);
            if (p > np.vertices.back().first) {
                CHECK(q >= np.vertices.back().second);
                continue;
            }
            // hull height at p
            for (size_t i = 1; i < np.vertices.size(); ++i) {
                auto a = np.vertices[i - 1], b = np.vertices[i];
                if (p < a.first || p > b.first) continue;
                double h = a.second + static_cast<double>(b.second - a.second) * (p - a.first) / (b.first - a.first);
                CHECK(q >= h - 1e-12);
            }
        }
        for (const auto& s : np.segments) CHECK(s.slope < 0);
        for (size_t i = 1; i < np.segments.size(); ++i) CHECK(np.segments[i].slope >= np.segments[i - 1].slope);
    }
}

TEST_CASE("logistic orbit diagram") {
    auto sys = build_builtin("logistic");
    auto count_clusters = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        int k = 1;
        for (size_t i = 1; i < v.size(); ++i)
            if (v[i] - v[i - 1] > 1e-4) ++k;
        return k;
    };
    std::vector<double> ls{2.5, 3.2, 3.83};
    auto d = bifurcation_diagram(sys, "lambda", ls);
    auto s = bifurcation_diagram_serial(sys, "lambda", ls);
    CHECK(d.points == s.points);
    REQUIRE(d.points.size() == 300);
    std::vector<double> at[3];
    for (auto [l, x] : d.points) at[l == 2.5 ? 0 : l == 3.2 ? 1 : 2].push_back(x);
    for (double x : at[0]) CHECK(std::abs(x - 0.6) <= 1e-6);
    CHECK(count_clusters(at[1]) == 2);
    CHECK(count_clusters(at[2]) == 3);
    CHECK(diagram_csv(d).rfind("lambda,x\n2.5,", 0) == 0);

    auto blow = polynomial_system("square", Kind::Map, 1, {{"lambda", 1.0, std::nullopt}},
                                  [](const std::vector<Rational>& p) {
                                      TaylorMap<Rational> f(1, 1);
                                      f.add({2}, 0, p[0]);
                                      return f;
                                  });
    DiagramOptions o;
    o.x0 = Vec{{2.0}};
    auto e = bifurcation_diagram(blow, "lambda", {0.1, 1.0}, o);
    CHECK(e.notes.size() == 1);
    CHECK(e.points.size() == 100);
}
