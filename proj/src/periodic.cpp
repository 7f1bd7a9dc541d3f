#include "dynkit/periodic.hpp"

#include "dynkit/io.hpp"
#include "dynkit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dynkit {

const char* cross_dir_name(CrossDir d) {
    switch (d) {
        case CrossDir::Positive: return "positive";
        case CrossDir::Negative: return "negative";
        case CrossDir::Both: return "both";
    }
    return "?";
}

CrossDir parse_cross_dir(const std::string& s) {
    if (s == "positive") return CrossDir::Positive;
    if (s == "negative") return CrossDir::Negative;
    if (s == "both") return CrossDir::Both;
    throw Error(Err::Usage, "section direction must be positive, negative or both, got '" + s + "'");
}

SectionDef make_section(const Vec& anchor, const Vec& normal, CrossDir dir, double t_min, double t_max) {
    if (anchor.size() != normal.size()) throw Error(Err::DimensionMismatch, "section anchor and normal differ in size");
    double nn = normal.norm();
    if (!(nn > 0) || !std::isfinite(nn)) throw Error(Err::Usage, "section normal must be a nonzero finite vector");
    if (!(t_min > 0 && t_min < t_max)) throw Error(Err::Usage, "need 0 < t_min_return < t_max_return");
    return {anchor, normal / nn, dir, t_min, t_max};
}

double section_value(const SystemDef& sys, const SectionDef& sec, const Vec& x) {
    return state_difference(sys, x, sec.anchor).dot(sec.normal);
}

PoincareResult poincare_map(const SystemDef& sys, const SectionDef& sec, const Vec& x, const FlowOptions& opts,
                            double t0) {
    if (sys.kind != Kind::Flow) throw Error(Err::Usage, "poincare_map needs a flow");
    if (x.size() != sys.dim || sec.anchor.size() != sys.dim)
        throw Error(Err::DimensionMismatch, sys.name + ": section or state has the wrong dimension");
    if (std::abs(section_value(sys, sec, x)) > 1e-9) throw Error(Err::Usage, "start point is not on the section");
    if (std::abs(evaluate_raw(sys, x, t0).dot(sec.normal)) <= 1e-8)
        throw Error(Err::TangentialCrossing, "flow is tangent to the section at the start point");

    auto prob = flow_problem(sys);
    bool found = false;
    double ta = 0, tb = 0;
    Vec ya, yb;
    auto obs = [&](double tp, const Vec& yp, double t, const Vec& y) {
        if (t - t0 < sec.t_min_return) return true;
        double sp = section_value(sys, sec, yp), s = section_value(sys, sec, y);
        // A jump of a circle coordinate across the antipode is not a crossing.
        if (std::abs((s - sp) - (y - yp).dot(sec.normal)) > 1e-6 * (1 + std::abs(s - sp))) return true;
        bool up = sp < 0 && s >= 0, down = sp > 0 && s <= 0;
        bool hit = sec.direction == CrossDir::Positive ? up : sec.direction == CrossDir::Negative ? down : (up || down);
        if (!hit) return true;
        // Crossings before t_min_return (the start point itself) do not count.
        if (tp - t0 < sec.t_min_return && tp + (t - tp) * sp / (sp - s) - t0 < sec.t_min_return) return true;
        found = true;
        ta = tp;
        ya = yp;
        tb = t;
        yb = y;
        return false;
    };
    integrate(prob, t0, x, t0 + sec.t_max_return, opts, obs);
    if (!found) throw Error(Err::NoReturn, "no return to the section within t_max_return");

    // Safeguarded Newton on s(tau) inside [ta, tb].
    double sa = section_value(sys, sec, ya), sb = section_value(sys, sec, yb);
    double lo = ta, hi = tb, tau = tb;
    Vec y = yb;
    double s = sb;
    auto at = [&](double t) { return t == ta ? ya : integrate(prob, ta, ya, t, opts).y; };
    for (int it = 0; it < 100 && hi - lo > 1e-10 && s != 0.0; ++it) {
        double ds = evaluate_raw(sys, y, tau).dot(sec.normal);
        double next = tau - s / ds;
        if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
        double step = std::abs(next - tau);
        tau = next;
        y = at(tau);
        s = section_value(sys, sec, y);
        if ((s < 0) == (sa < 0)) lo = tau;
        else hi = tau;
        if (step < 1e-12) break;
    }
    if (std::abs(evaluate_raw(sys, y, tau).dot(sec.normal)) <= 1e-8)
        throw Error(Err::TangentialCrossing, "flow is tangent to the section at the crossing");
    // Put the image exactly on the section.
    y -= section_value(sys, sec, y) * sec.normal;
    return {reduce_periodic(sys, y), tau - t0};
}

PeriodicOrbit find_periodic_orbit(const SystemDef& sys, const Vec& x_guess, double T_guess, const FlowOptions& opts,
                                  double tol) {
    if (sys.kind != Kind::Flow || !sys.autonomous) throw Error(Err::Usage, "find_periodic_orbit needs an autonomous flow");
    if (x_guess.size() != sys.dim) throw Error(Err::DimensionMismatch, sys.name + ": wrong state dimension");
    if (!(T_guess > 0)) throw Error(Err::Usage, "period guess must be positive");
    const int n = sys.dim;
    const Vec fg = evaluate(sys, x_guess);
    auto collapsed = [&](const Vec& x) {
        if (evaluate(sys, x).norm() < 1e-8)
            throw Error(Err::CollapsedToEquilibrium, "orbit refinement collapsed onto an equilibrium");
    };
    auto residual = [&](const Vec& x, double T, VariationalResult* keep) {
        auto vr = variational_flow(sys, x, T, opts);
        Vec r(n + 1);
        r.head(n) = state_difference(sys, vr.x_final, x);
        r[n] = fg.dot(x - x_guess);
        if (keep) *keep = std::move(vr);
        return r;
    };

    Vec x = x_guess;
    double T = T_guess;
    VariationalResult vr;
    Vec r = residual(x, T, &vr);
    for (int it = 0; it < 60; ++it) {
        collapsed(x);
        if (r.head(n).norm() <= tol && std::abs(r[n]) <= tol) {
            return {reduce_periodic(sys, x), T, r.head(n).norm(), it};
        }
        Mat J = Mat::Zero(n + 1, n + 1);
        J.topLeftCorner(n, n) = vr.U - Mat::Identity(n, n);
        J.topRightCorner(n, 1) = evaluate(sys, vr.x_final);
        J.bottomLeftCorner(1, n) = fg.transpose();
        // Minimum-norm step: families of periodic orbits make J singular.
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(J);
        cod.setThreshold(1e-9);
        Vec d = cod.solve(-r);
        if (!all_finite(d)) throw Error(Err::NoConvergence, "periodic-orbit Newton step is not finite");
        double lam = 1.0;
        bool ok = false;
        for (int k = 0; k < 12; ++k, lam *= 0.5) {
            Vec xn = x + lam * d.head(n);
            double Tn = T + lam * d[n];
            // The period stays within the span the flow is integrated over.
            if (!(Tn >= 0.25 * T_guess && Tn <= 2 * T_guess)) continue;
            VariationalResult vn;
            Vec rn;
            try {
                rn = residual(xn, Tn, &vn);
            } catch (const Error& e) {
                if (e.kind() == Err::NonFiniteState || e.kind() == Err::StepLimitExceeded) continue;
                throw;
            }
            if (rn.norm() < r.norm()) {
                x = xn;
                T = Tn;
                r = rn;
                vr = std::move(vn);
                ok = true;
                break;
            }
        }
        if (!ok) break;
    }
    collapsed(x);
    // A guess whose own orbit settles on an equilibrium has no cycle nearby.
    try {
        Vec far = flow_to(sys, x_guess, 50 * T_guess, opts);
        if (evaluate(sys, far).norm() < 1e-8)
            throw Error(Err::CollapsedToEquilibrium, "the orbit of the guess converges to an equilibrium");
    } catch (const Error& e) {
        if (e.kind() == Err::CollapsedToEquilibrium) throw;
    }
    throw Error(Err::NoConvergence, "periodic orbit not found, residual " + fmt_double(r.head(n).norm()));
}

MonodromyResult monodromy_from(const Mat& U, double T) {
    MonodromyResult m;
    m.U_T = U;
    m.multipliers = sorted_eigenvalues(U);
    m.trivial_residual = 1e300;
    for (cplx mu : m.multipliers) {
        m.exponents.push_back(std::log(mu) / T);
        m.trivial_residual = std::min(m.trivial_residual, std::abs(mu - 1.0));
    }
    return m;
}

MonodromyResult monodromy(const SystemDef& sys, const Vec& x0, double T, const FlowOptions& opts) {
    if (sys.kind != Kind::Flow) throw Error(Err::Usage, "monodromy needs a flow");
    if (!(T > 0)) throw Error(Err::Usage, "period must be positive");
    return monodromy_from(variational_flow(sys, x0, T, opts).U, T);
}

namespace {

Mat rotation_propagator(double w, double t) {
    Mat R(2, 2);
    R << std::cos(w * t), std::sin(w * t) / w, -w * std::sin(w * t), std::cos(w * t);
    return R;
}

}  // namespace

MonodromyResult hill_monodromy(double T, double Omega) {
    if (!(T > 0 && Omega > 0)) throw Error(Err::Usage, "hill_monodromy needs T > 0 and Omega > 0");
    Mat M = rotation_propagator(1.0, T / 2) * rotation_propagator(Omega, T / 2);
    // Multipliers from trace and determinant.
    double tr = M.trace(), det = M.determinant();
    cplx disc = std::sqrt(cplx(tr * tr - 4 * det));
    MonodromyResult m;
    m.U_T = M;
    m.multipliers = {(tr + disc) / 2.0, (tr - disc) / 2.0};
    std::sort(m.multipliers.begin(), m.multipliers.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    m.trivial_residual = 1e300;
    for (cplx mu : m.multipliers) {
        m.exponents.push_back(std::log(mu) / T);
        m.trivial_residual = std::min(m.trivial_residual, std::abs(mu - 1.0));
    }
    return m;
}

Mat hill_monodromy_numeric(double T, double Omega, const FlowOptions& opts) {
    auto sys = build_builtin("hill", {{"T", T}, {"Omega", Omega}});
    return variational_flow(sys, Vec::Zero(2), T, opts).U;
}

namespace {

template <class Loop>
std::vector<HillGridPoint> hill_grid_impl(const std::vector<double>& Ts, const std::vector<double>& Omegas,
                                          const FlowOptions& opts, Loop loop) {
    const int nT = static_cast<int>(Ts.size()), nO = static_cast<int>(Omegas.size());
    std::vector<HillGridPoint> out(static_cast<size_t>(nT) * nO);
    loop(nT * nO, [&](int i) {
        double T = Ts[i / nO], W = Omegas[i % nO];
        Mat M = hill_monodromy(T, W).U_T;
        Mat N = hill_monodromy_numeric(T, W, opts);
        out[i] = {T, W, (M - N).cwiseAbs().maxCoeff(), std::abs(M.determinant() - 1.0)};
    });
    return out;
}

}  // namespace

std::vector<HillGridPoint> hill_grid(const std::vector<double>& Ts, const std::vector<double>& Omegas,
                                     const FlowOptions& opts) {
    return hill_grid_impl(Ts, Omegas, opts, [](int n, auto&& f) { parallel_for(n, f); });
}

std::vector<HillGridPoint> hill_grid_serial(const std::vector<double>& Ts, const std::vector<double>& Omegas,
                                            const FlowOptions& opts) {
    return hill_grid_impl(Ts, Omegas, opts, [](int n, auto&& f) { serial_for(n, f); });
}

std::string hill_chart_csv(double T, const std::vector<double>& Omegas) {
    std::ostringstream os;
    os << "Omega,trace,exp_re_1,exp_im_1,exp_re_2,exp_im_2\n";
    for (double W : Omegas) {
        auto m = hill_monodromy(T, W);
        os << csv_row({W, m.U_T.trace(), m.exponents[0].real(), m.exponents[0].imag(), m.exponents[1].real(),
                       m.exponents[1].imag()});
    }
    return os.str();
}

namespace {

// Scalar map x -> F(lambda, x) with its x-derivative.
struct Family {
    const SystemDef& base;
    int k;

    SystemDef at(double lam) const {
        auto s = base;
        s.params[k].value = lam;
        return with_params(s, {});
    }
};

double f1(const SystemDef& s, double x) { return evaluate_raw(s, Vec::Constant(1, x))[0]; }
double df1(const SystemDef& s, double x) { return jacobian_at(s, Vec::Constant(1, x))(0, 0); }

double critical_point(const SystemDef& s, double lo, double hi) {
    const double g = (std::sqrt(5.0) - 1) / 2;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = std::abs(df1(s, c)), fd = std::abs(df1(s, d));
    while (b - a > 1e-13 * std::max(1.0, std::abs(a))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = std::abs(df1(s, c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = std::abs(df1(s, d));
        }
    }
    return 0.5 * (a + b);
}

double iterate_n(const SystemDef& s, double x, long n) {
    for (long i = 0; i < n; ++i) x = f1(s, x);
    return x;
}

// f^(2^m)(c) - c at the critical point c.
double superstable_residual(const Family& fam, double lam, int m, const CascadeOptions& o) {
    auto s = fam.at(lam);
    double c = critical_point(s, o.x_lo, o.x_hi);
    return iterate_n(s, c, 1L << m) - c;
}

template <class G>
double bisect(G&& g, double a, double b, double ga, double width) {
    for (int it = 0; it < 200 && b - a > width; ++it) {
        double m = 0.5 * (a + b), gm = g(m);
        if ((gm < 0) == (ga < 0)) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

double find_superstable(const Family& fam, int m, double left, double right, const CascadeOptions& o) {
    const int N = 400;
    auto g = [&](double l) { return superstable_residual(fam, l, m, o); };
    double prev_l = left + (right - left) / N, prev = g(prev_l);
    for (int i = 2; i <= N; ++i) {
        double l = left + (right - left) * i / N, v = g(l);
        if (!std::isfinite(v)) break;
        if ((v < 0) != (prev < 0) && std::isfinite(prev))
            return bisect(g, prev_l, l, prev, 1e-15 * std::max(1.0, std::abs(l)));
        prev = v;
        prev_l = l;
    }
    throw Error(Err::CascadeLost, "superstable parameter for period 2^" + std::to_string(m) + " not bracketed");
}

// Multiplier of the 2^(n-1)-cycle through the point nearest the critical point.
double cycle_multiplier(const Family& fam, double lam, int n, const CascadeOptions& o) {
    auto s = fam.at(lam);
    const long p = 1L << (n - 1);
    double x = critical_point(s, o.x_lo, o.x_hi);
    for (int it = 0; it < 100; ++it) {
        double y = x, d = 1.0;
        for (long i = 0; i < p; ++i) {
            d *= df1(s, y);
            y = f1(s, y);
        }
        double G = y - x, dG = d - 1.0;
        // roundoff in f^p(x) grows with p
        if (std::abs(G) < 1e-14 * p) return d;
        double step = G / dG;
        if (!std::isfinite(step)) break;
        if (std::abs(step) < 1e-15) return d;
        x -= std::clamp(step, -0.1 * (o.x_hi - o.x_lo), 0.1 * (o.x_hi - o.x_lo));
    }
    throw Error(Err::CascadeLost, "2^" + std::to_string(n - 1) + "-cycle not found at lambda = " + fmt_double(lam));
}

template <class Loop>
CascadeResult cascade_impl(const SystemDef& sys, const std::string& param, int n_max, const CascadeOptions& o,
                           Loop loop) {
    if (sys.kind != Kind::Map || sys.dim != 1) throw Error(Err::Usage, "cascade needs a one-dimensional map family");
    if (n_max < 1 || n_max > 12) throw Error(Err::Usage, "cascade n_max must be in [1, 12]");
    if (!(o.lambda_lo < o.lambda_hi) || !(o.x_lo < o.x_hi)) throw Error(Err::Usage, "cascade ranges are empty");
    Family fam{sys, sys.param_index(param)};
    CascadeResult r;
    r.superstable.push_back(find_superstable(fam, 0, o.lambda_lo, o.lambda_hi, o));
    for (int m = 1; m <= n_max; ++m) {
        double left = r.superstable.back();
        double right = m == 1 ? o.lambda_hi : left + (left - r.superstable[m - 2]);
        r.superstable.push_back(find_superstable(fam, m, left, std::min(right, o.lambda_hi), o));
    }
    r.lambdas.assign(n_max, 0.0);
    loop(n_max, [&](int i) {
        const int n = i + 1;
        auto h = [&](double l) { return cycle_multiplier(fam, l, n, o) + 1.0; };
        double a = r.superstable[n - 1], b = r.superstable[n];
        // The cycle is superstable at a, so h(a) = 1.
        if (h(b) >= 0) throw Error(Err::CascadeLost, "multiplier did not pass -1 for n = " + std::to_string(n));
        r.lambdas[i] = bisect(h, a, b, 1.0, o.width);
    });
    for (size_t i = 1; i < r.lambdas.size(); ++i)
        if (!(r.lambdas[i] > r.lambdas[i - 1])) throw Error(Err::CascadeLost, "doubling parameters not increasing");
    for (size_t i = 0; i + 2 < r.lambdas.size(); ++i)
        r.deltas.push_back((r.lambdas[i + 1] - r.lambdas[i]) / (r.lambdas[i + 2] - r.lambdas[i + 1]));
    const size_t N = r.lambdas.size();
    if (N >= 3) {
        double a = r.lambdas[N - 3], b = r.lambdas[N - 2], c = r.lambdas[N - 1];
        r.accumulation_estimate = c - (c - b) * (c - b) / ((c - b) - (b - a));
    } else {
        r.accumulation_estimate = r.lambdas.back();
    }
    return r;
}

}  // namespace

CascadeResult period_doubling_cascade(const SystemDef& sys, const std::string& param, int n_max,
                                      const CascadeOptions& opts) {
    return cascade_impl(sys, param, n_max, opts, [](int n, auto&& f) { parallel_for(n, f); });
}

CascadeResult period_doubling_cascade_serial(const SystemDef& sys, const std::string& param, int n_max,
                                             const CascadeOptions& opts) {
    return cascade_impl(sys, param, n_max, opts, [](int n, auto&& f) { serial_for(n, f); });
}

std::string cascade_csv(const CascadeResult& r) {
    std::ostringstream os;
    os << "n,lambda_n,delta_n\n";
    for (size_t i = 0; i < r.lambdas.size(); ++i) {
        os << (i + 1) << "," << fmt_double(r.lambdas[i]) << ",";
        if (i >= 1 && i - 1 < r.deltas.size()) os << fmt_double(r.deltas[i - 1]);
        os << "\n";
    }
    return os.str();
}

FlipCoefficients flip_coefficients(const SystemDef& sys, const std::string& param, double x_star, double lambda_c,
                                   double tol) {
    if (sys.kind != Kind::Map || sys.dim != 1) throw Error(Err::Usage, "flip_coefficients needs a one-dimensional map");
    Family fam{sys, sys.param_index(param)};
    const auto s0 = fam.at(lambda_c);
    auto F = [&](double x, double l) { return l == lambda_c ? f1(s0, x) : f1(fam.at(l), x); };
    const double sx = std::max(1.0, std::abs(x_star)), sl = std::max(1.0, std::abs(lambda_c));

    // Central differences, one Richardson step each.
    auto rich2 = [](auto D, double h) { return (4 * D(h / 2) - D(h)) / 3; };
    auto d1 = [&](double h) { return (F(x_star + h, lambda_c) - F(x_star - h, lambda_c)) / (2 * h); };
    auto d2 = [&](double h) {
        return (F(x_star + h, lambda_c) - 2 * F(x_star, lambda_c) + F(x_star - h, lambda_c)) / (h * h);
    };
    auto d3 = [&](double h) {
        return (F(x_star + 2 * h, lambda_c) - 2 * F(x_star + h, lambda_c) + 2 * F(x_star - h, lambda_c) -
                F(x_star - 2 * h, lambda_c)) /
               (2 * h * h * h);
    };
    auto dl = [&](double h) { return (F(x_star, lambda_c + h) - F(x_star, lambda_c - h)) / (2 * h); };
    auto dxl = [&](double h) {
        double k = h * sl / sx;
        return (F(x_star + h, lambda_c + k) - F(x_star + h, lambda_c - k) - F(x_star - h, lambda_c + k) +
                F(x_star - h, lambda_c - k)) /
               (4 * h * k);
    };

    double fp = rich2(d1, 1e-3 * sx);
    if (std::abs(F(x_star, lambda_c) - x_star) > 1e-6 || std::abs(fp + 1.0) > 1e-6)
        throw Error(Err::NotCritical, "not a fixed point with multiplier -1 (f' = " + fmt_double(fp) + ")");
    double fpp = rich2(d2, 1e-3 * sx), fppp = rich2(d3, 1e-2 * sx);

    FlipCoefficients c;
    c.c01 = rich2(dl, 1e-3 * sl);
    c.c11 = rich2(dxl, 1e-3 * sx);
    c.c20 = fpp / 2;
    c.c30 = fppp / 6;
    c.transversality = c.c11 + c.c20 * c.c01;
    c.cubic = c.c30 + c.c20 * c.c20;
    c.transversal = std::abs(c.transversality) > tol;
    c.nondegenerate = std::abs(c.cubic) > tol;
    c.schwarzian = fppp / fp - 1.5 * (fpp / fp) * (fpp / fp);
    c.supercritical = c.nondegenerate && c.cubic > 0;
    if (c.nondegenerate) c.period2_slope = -c.transversality / c.cubic;
    return c;
}

}  // namespace dynkit
