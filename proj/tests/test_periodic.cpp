#include "doctest.h"

#include "dynkit/periodic.hpp"

#include <cmath>
#include <numbers>

using namespace dynkit;

namespace {

constexpr double pi = std::numbers::pi;

FlowOptions tight() {
    FlowOptions o;
    o.abs_tol = o.rel_tol = 1e-12;
    return o;
}

SystemDef rotation() { return linear_system(Mat{{0, -1}, {1, 0}}); }

// Unforced Duffing x'' = x - x^3 as a planar flow.
SystemDef duffing2() {
    TaylorMap<Rational> f(2, 2);
    f.add({0, 1}, 0, Rational(1));
    f.add({1, 0}, 1, Rational(1));
    f.add({3, 0}, 1, Rational(-1));
    return polynomial_system("duffing2", Kind::Flow, f);
}

double duffing_energy(const Vec& x) { return 0.5 * x[1] * x[1] - 0.5 * x[0] * x[0] + 0.25 * std::pow(x[0], 4); }

// Period from upward zero crossings of x2 on a finely sampled trajectory.
double sampled_period(const SystemDef& sys, const Vec& x0, double t_end) {
    auto tr = trajectory(sys, x0, t_end, 1e-3, tight());
    std::vector<double> ups;
    for (size_t i = 1; i < tr.states.size(); ++i) {
        double a = tr.states[i - 1][1], b = tr.states[i][1];
        if (a < 0 && b >= 0) ups.push_back(tr.times[i - 1] + (tr.times[i] - tr.times[i - 1]) * a / (a - b));
    }
    REQUIRE(ups.size() >= 3);
    return ups[ups.size() - 1] - ups[ups.size() - 2];
}

}  // namespace

TEST_CASE("rotation returns to the section after 2 pi") {
    auto sys = rotation();
    auto sec = make_section(Vec::Zero(2), Vec{{0, 1}}, CrossDir::Positive);
    auto r = poincare_map(sys, sec, Vec{{1, 0}}, tight());
    CHECK(std::abs(r.tau - 2 * pi) <= 1e-9);
    CHECK((r.image - Vec{{1, 0}}).norm() <= 1e-9);

    auto both = make_section(Vec::Zero(2), Vec{{0, 1}}, CrossDir::Both);
    CHECK(std::abs(poincare_map(sys, both, Vec{{1, 0}}, tight()).tau - pi) <= 1e-9);

    auto short_sec = make_section(Vec::Zero(2), Vec{{0, 1}}, CrossDir::Positive, 1e-3, 1.0);
    CHECK_THROWS_AS(poincare_map(sys, short_sec, Vec{{1, 0}}), Error);
    try {
        poincare_map(sys, make_section(Vec::Zero(2), Vec{{1, 0}}), Vec{{0, 0}});
        FAIL("expected TangentialCrossing");
    } catch (const Error& e) {
        CHECK(e.kind() == Err::TangentialCrossing);
    }
}

TEST_CASE("unforced duffing section map is the time-one flow") {
    auto sys = build_builtin("duffing_forced");
    auto sec = make_section(Vec::Zero(3), Vec{{0, 0, 1}});
    Vec x{{0.5, 0.2, 0.0}};
    for (int k = 0; k < 5; ++k) {
        auto r = poincare_map(sys, sec, x, tight());
        CHECK(std::abs(r.tau - 1.0) <= 1e-9);
        Vec direct = flow_to(duffing2(), x.head(2), 1.0, tight());
        CHECK((r.image.head(2) - direct).norm() <= 1e-8);
        CHECK(std::abs(duffing_energy(r.image) - duffing_energy(x)) <= 1e-8);
        CHECK(std::abs(r.image[2]) <= 1e-9);
        x = r.image;
    }
}

TEST_CASE("van der pol limit cycle") {
    auto sys = build_builtin("van_der_pol");
    auto orb = find_periodic_orbit(sys, Vec{{2, 0}}, 6.5, tight());
    CHECK(orb.residual <= 1e-9);
    double T_oracle = sampled_period(sys, Vec{{2, 0}}, 80.0);
    CHECK(std::abs(orb.T - T_oracle) < 1e-4);
    CHECK(orb.T == doctest::Approx(6.66).epsilon(0.01));

    auto mono = monodromy(sys, orb.x0, orb.T, tight());
    CHECK(mono.trivial_residual <= 1e-4);
    // The other multiplier is the derivative of the section map at the fixed point.
    cplx other = std::abs(mono.multipliers[0] - 1.0) < std::abs(mono.multipliers[1] - 1.0) ? mono.multipliers[1]
                                                                                            : mono.multipliers[0];
    Vec f = evaluate(sys, orb.x0);
    auto sec = make_section(orb.x0, f);
    Vec e{{-sec.normal[1], sec.normal[0]}};
    const double h = 1e-5;
    double pp = (poincare_map(sys, sec, orb.x0 + h * e, tight()).image - orb.x0).dot(e);
    double pm = (poincare_map(sys, sec, orb.x0 - h * e, tight()).image - orb.x0).dot(e);
    CHECK(std::abs((pp - pm) / (2 * h) - other.real()) <= 1e-4);
    CHECK(std::abs(other.imag()) <= 1e-12);
}

TEST_CASE("periodic orbit refinement edge cases") {
    // Every orbit has period 2 pi, so a guess off 2 pi slides to the origin.
    auto rot = find_periodic_orbit(rotation(), Vec{{0.7, 0.2}}, 2 * pi, tight());
    CHECK(std::abs(rot.T - 2 * pi) <= 1e-9);
    auto U = monodromy(rotation(), Vec{{1, 0}}, 2 * pi, tight()).U_T;
    CHECK((U - Mat::Identity(2, 2)).norm() <= 1e-9);

    auto lor = build_builtin("lorenz", {{"r", 0.5}});
    try {
        find_periodic_orbit(lor, Vec{{1, 1, 1}}, 5.0);
        FAIL("expected CollapsedToEquilibrium");
    } catch (const Error& e) {
        CHECK(e.kind() == Err::CollapsedToEquilibrium);
    }
}

TEST_CASE("conservative cycle has multipliers on the unit circle") {
    auto sys = duffing2();
    // Closed orbit around the center (1, 0) inside the homoclinic loop; the
    // period is the first return to x2 = 0.
    Vec x0{{1.3, 0}};
    auto sec = make_section(Vec::Zero(2), Vec{{0, 1}}, CrossDir::Negative);
    auto ret = poincare_map(sys, sec, x0, tight());
    CHECK((ret.image - x0).norm() <= 1e-9);
    auto m = monodromy(sys, x0, ret.tau, tight());
    CHECK(std::abs(m.U_T.determinant() - 1.0) <= 1e-8);
    for (cplx mu : m.multipliers) CHECK(std::abs(std::abs(mu) - 1.0) <= 1e-4);
    CHECK(std::abs(m.multipliers[0] * m.multipliers[1] - 1.0) <= 1e-8);
}

TEST_CASE("hill monodromy closed form") {
    for (double T : {0.5, 1.0, 2.7}) {
        auto m = hill_monodromy(T, 1.0);
        Mat R{{std::cos(T), std::sin(T)}, {-std::sin(T), std::cos(T)}};
        CHECK((m.U_T - R).norm() <= 1e-14);
        CHECK(std::abs(m.U_T.trace() - 2 * std::cos(T)) <= 1e-14);
    }
    auto m = hill_monodromy(pi, 2.0);
    Mat N = hill_monodromy_numeric(pi, 2.0);
    CHECK((m.U_T - N).cwiseAbs().maxCoeff() <= 1e-8);
    // |trace| > 2 means a real multiplier pair off the unit circle.
    bool unstable = std::abs(m.U_T.trace()) > 2;
    CHECK(unstable == (std::abs(m.multipliers[0]) > 1 + 1e-12));
    CHECK(std::abs(m.multipliers[0] * m.multipliers[1] - 1.0) <= 1e-12);
}

TEST_CASE("hill grid agrees with variational integration") {
    std::vector<double> Ts, Ws;
    for (int i = 0; i < 10; ++i) {
        Ts.push_back(0.5 + (pi - 0.5) * i / 9);
        Ws.push_back(0.2 + 2.8 * i / 9);
    }
    auto g = hill_grid(Ts, Ws);
    auto s = hill_grid_serial(Ts, Ws);
    REQUIRE(g.size() == 100);
    for (size_t i = 0; i < g.size(); ++i) {
        CHECK(g[i].max_entry_diff <= 1e-8);
        CHECK(g[i].det_error <= 1e-14);
        CHECK(g[i].max_entry_diff == s[i].max_entry_diff);
    }
    auto csv = hill_chart_csv(pi, Ws);
    CHECK(csv.rfind("Omega,trace,exp_re_1,exp_im_1,exp_re_2,exp_im_2\n", 0) == 0);
}

TEST_CASE("logistic period-doubling cascade") {
    auto sys = build_builtin("logistic");
    auto r = period_doubling_cascade(sys, "lambda", 6);
    REQUIRE(r.lambdas.size() == 6);
    CHECK(std::abs(r.lambdas[0] - 3.0) <= 1e-8);
    CHECK(std::abs(r.lambdas[1] - (1 + std::sqrt(6.0))) <= 1e-6);
    for (size_t i = 1; i < r.lambdas.size(); ++i) CHECK(r.lambdas[i] > r.lambdas[i - 1]);
    REQUIRE(r.deltas.size() == 4);
    double d5 = r.deltas[3], d4 = r.deltas[2];
    CHECK(std::abs(d5 - 4.669) / 4.669 <= 0.05);
    CHECK(std::abs(d5 - d4) / d4 < 0.10);
    CHECK(std::abs(r.accumulation_estimate - 3.56) <= 1e-2);
    auto s = period_doubling_cascade_serial(sys, "lambda", 6);
    CHECK(s.lambdas == r.lambdas);
    CHECK(cascade_csv(r).rfind("n,lambda_n,delta_n\n1,", 0) == 0);

    // long cycles: Newton must tolerate roundoff growing with the period
    auto deep = period_doubling_cascade(sys, "lambda", 9);
    REQUIRE(deep.deltas.size() == 7);
    CHECK(std::abs(deep.deltas[5] - 4.6692016) <= 1e-3);
    CHECK(deep.lambdas[8] < 3.5699457);
}

TEST_CASE("flip coefficients of the logistic map at lambda = 3") {
    auto sys = build_builtin("logistic");
    auto c = flip_coefficients(sys, "lambda", 2.0 / 3.0, 3.0);
    CHECK(c.c20 == doctest::Approx(-3.0).epsilon(1e-6));
    CHECK(std::abs(c.c30) <= 1e-6);
    CHECK(c.c01 == doctest::Approx(2.0 / 9.0).epsilon(1e-6));
    CHECK(c.c11 == doctest::Approx(-1.0 / 3.0).epsilon(1e-6));
    CHECK(c.schwarzian < 0);
    CHECK(c.supercritical);
    CHECK(c.transversal);
    CHECK(c.nondegenerate);
    // oracle: the exact 2-cycle ((l+1) +- sqrt((l+1)(l-3))) / (2l)
    double l = 3.001, half = std::sqrt((l + 1) * (l - 3)) / (2 * l);
    CHECK(std::abs(c.period2_slope * (l - 3) - half * half) / (half * half) < 0.10);

    CHECK_THROWS_AS(flip_coefficients(sys, "lambda", 0.6, 2.5), Error);
}

TEST_CASE("flip coefficients of an exactly linear map are degenerate") {
    auto lin = polynomial_system("neg", Kind::Map, 1, {{"lambda", 0.0, std::nullopt}}, [](const std::vector<Rational>&) {
        TaylorMap<Rational> f(1, 1);
        f.add({1}, 0, Rational(-1));
        return f;
    });
    auto c = flip_coefficients(lin, "lambda", 0.0, 0.0);
    CHECK(c.c20 == 0.0);
    CHECK(c.c30 == 0.0);
    CHECK_FALSE(c.nondegenerate);
    CHECK_FALSE(c.transversal);
}
