#include "doctest.h"

#include "dynkit/dynamics.hpp"
#include "dynkit/systems.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace dynkit;

namespace {
constexpr double pi = std::numbers::pi;

Vec random_state(std::mt19937_64& rng, int n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = u(rng);
    return x;
}
}  // namespace

TEST_CASE("builtin defaults") {
    auto lz = build_builtin("lorenz");
    CHECK(lz.kind == Kind::Flow);
    CHECK(lz.dim == 3);
    CHECK(lz.param("sigma") == 10.0);
    CHECK(lz.param("b") == 8.0 / 3.0);
    CHECK(lz.param("r") == 28.0);

    auto he = build_builtin("henon");
    CHECK(he.kind == Kind::Map);
    CHECK(he.dim == 2);
    CHECK(he.param("lambda") == 1.4);
    CHECK(he.param("b") == 0.3);

    CHECK(builtin_names().size() == 11);
    for (const auto& n : builtin_names()) CHECK(build_builtin(n).has_jacobian());
}

TEST_CASE("builtin errors") {
    CHECK_THROWS_AS(build_builtin("rossler"), Error);
    try {
        build_builtin("lorenz", {{"rho", 1.0}});
        FAIL("expected UnknownParam");
    } catch (const Error& e) {
        CHECK(e.kind() == Err::UnknownParam);
    }
    try {
        evaluate(build_builtin("lorenz"), Vec::Zero(2));
        FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == Err::DimensionMismatch);
    }
}

TEST_CASE("evaluate examples") {
    CHECK(evaluate(build_builtin("lorenz"), Vec::Zero(3)).norm() == 0.0);
    CHECK(evaluate(build_builtin("logistic", {{"lambda", 4}}), Vec::Constant(1, 0.5))[0] == 1.0);
    Vec y = evaluate(build_builtin("standard_map", {{"epsilon", 0.5}}), Vec{{pi, 0.0}});
    CHECK(std::abs(y[0] - pi) < 1e-15);
    CHECK(std::abs(y[1]) < 1e-15);
}

TEST_CASE("standard map at epsilon 0 is a rigid rotation") {
    auto sm = build_builtin("standard_map", {{"epsilon", 0.0}});
    Vec x0{{0.3, 0.7}};
    auto tr = iterate_map(sm, x0, 50);
    for (size_t n = 0; n < tr.states.size(); ++n) {
        double q = std::fmod(0.3 + n * 0.7, 2 * pi);
        CHECK(std::abs(tr.states[n][0] - q) < 1e-12);
        CHECK(tr.states[n][1] == 0.7);
    }
}

TEST_CASE("analytic jacobians agree with finite differences") {
    std::mt19937_64 rng(7);
    for (const auto& name : builtin_names()) {
        auto s = build_builtin(name);
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            Vec x = random_state(rng, s.dim, -2, 2);
            if (name.rfind("tent", 0) == 0 && std::abs(x[0] - 0.5) < 1e-3) continue;
            Mat Ja = jacobian_at(s, x), Jf = jacobian_fd(s, x);
            worst = std::max(worst, (Ja - Jf).norm() / std::max(1.0, Ja.norm()));
        }
        INFO(name);
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("jacobian determinants") {
    std::mt19937_64 rng(11);
    auto he = build_builtin("henon");
    for (int k = 0; k < 20; ++k) {
        // det [[-2 lambda x, 1], [b, 0]] = -b
        CHECK(std::abs(jacobian_at(he, random_state(rng, 2, -2, 2)).determinant() + 0.3) < 1e-15);
    }
    for (double eps : {0.1, 1.0, 10.0}) {
        auto sm = build_builtin("standard_map", {{"epsilon", eps}});
        double worst = 0.0;
        for (int k = 0; k < 1000; ++k)
            worst = std::max(worst, std::abs(jacobian_at(sm, random_state(rng, 2, -10, 10)).determinant() - 1));
        CHECK(worst <= 1e-12);
    }
    Mat A{{1, 2}, {3, 4}};
    auto lin = linear_system(A);
    CHECK(jacobian_at(lin, Vec{{0.3, -0.2}}) == A);
}

TEST_CASE("henon inverse") {
    std::mt19937_64 rng(3);
    auto he = build_builtin("henon");
    const double lam = 1.4, b = 0.3;
    for (int k = 0; k < 100; ++k) {
        Vec x = random_state(rng, 2, -1.5, 1.5);
        Vec y = evaluate(he, x);
        Vec back{{y[1] / b, y[0] - 1 + lam * (y[1] / b) * (y[1] / b)}};
        CHECK((back - x).norm() <= 1e-12);
    }
}

TEST_CASE("periodic coordinates are reduced") {
    auto sm = build_builtin("standard_map", {{"epsilon", 1.0}});
    Vec y = evaluate(sm, Vec{{6.0, 3.0}});
    CHECK(y[0] >= 0.0);
    CHECK(y[0] < 2 * pi);
    auto du = build_builtin("duffing_forced");
    auto tr = trajectory(du, Vec{{0.1, 0.0, 0.0}}, 3.0, 0.5);
    for (const auto& s : tr.states) CHECK((s[2] >= 0.0 && s[2] < 1.0));
}

TEST_CASE("conservativity report") {
    std::mt19937_64 rng(5);
    std::vector<Vec> s3, s2;
    for (int k = 0; k < 10; ++k) {
        s3.push_back(random_state(rng, 3, -5, 5));
        s2.push_back(random_state(rng, 2, -3, 3));
    }
    auto lz = build_builtin("lorenz");
    auto rl = conservativity_report(lz, s3);
    CHECK(rl.verdict == Conservativity::Dissipative);
    for (double w : rl.witnesses) CHECK(w == doctest::Approx(-41.0 / 3.0).epsilon(1e-15));
    auto div = exact_divergence(lz);
    REQUIRE(div);
    CHECK(div->terms.size() == 1);
    CHECK(div->coeff(MultiIndex{0, 0, 0}, 0) == Rational(-41, 3));

    CHECK(conservativity_report(build_builtin("standard_map"), s2).verdict == Conservativity::Conservative);
    CHECK(conservativity_report(build_builtin("henon"), s2).verdict == Conservativity::Dissipative);
    auto lg = build_builtin("logistic", {{"lambda", 4}});
    auto r = conservativity_report(lg, {Vec::Constant(1, 0.4), Vec::Constant(1, 0.9)});
    CHECK(r.verdict == Conservativity::Neither);
    CHECK(r.witnesses[0] == doctest::Approx(0.8));
    CHECK(r.witnesses[1] == doctest::Approx(3.2));
}

TEST_CASE("parameters are immutable values") {
    auto a = build_builtin("lorenz");
    auto b = with_param(a, "r", 0.5);
    CHECK(a.param("r") == 28.0);
    CHECK(b.param("r") == 0.5);
    auto h = with_param(build_builtin("hill"), "T", 2.0);
    CHECK(h.time_period == 2.0);
}

TEST_CASE("rationalize recovers small fractions") {
    CHECK(rationalize(8.0 / 3.0) == Rational(8, 3));
    CHECK(rationalize(0.3) == Rational(3, 10));
    CHECK(rationalize(-1.25) == Rational(-5, 4));
    Rational big = rationalize(std::numbers::pi);
    CHECK(to_double(big) == std::numbers::pi);
    CHECK(rat_str(Rational(-2, 6)) == "-1/3");
    CHECK(parse_rational("-1/3") == Rational(-1, 3));
    CHECK(parse_rational("010/3") == Rational(10, 3));
    CHECK(parse_rational("0.25") == Rational(1, 4));
    CHECK(parse_rational("-0.05") == Rational(-1, 20));
    CHECK(parse_rational("7") == 7);
    CHECK_THROWS_AS(parse_rational("0x10"), Error);
    CHECK_THROWS_AS(parse_rational("1/0"), Error);
    CHECK_THROWS_AS(parse_rational("1.2.3"), Error);
}
