#include "dynkit/dynamics.hpp"
#include "dynkit/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dynkit {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kBlowUp = 1e12;
constexpr double kMinStep = 1e-14;

double watched_norm(const OdeProblem& p, const Vec& y) {
    if (p.norm_dims > 0 && p.norm_dims < y.size()) return y.head(p.norm_dims).norm();
    return y.norm();
}

// Next time strictly beyond t (in direction dir) where the field jumps.
double next_break(const OdeProblem& p, double t, double dir, double t1) {
    double best = t1;
    if (p.break_period <= 0.0 || p.break_phases.empty()) return best;
    const double P = p.break_period;
    const double tiny = 1e-12 * std::max(1.0, std::abs(t));
    for (double ph : p.break_phases) {
        double k = std::floor(t / P - ph);
        for (int j = -1; j <= 2; ++j) {
            double b = (k + j + ph) * P;
            if (dir * (b - t) > tiny && dir * (best - b) > 0) best = b;
        }
    }
    return best;
}

void check_state(const OdeProblem& p, double t, const Vec& y) {
    if (!all_finite(y)) throw Error(Err::NonFiniteState, "state became non-finite at t = " + fmt_double(t));
    if (watched_norm(p, y) > kBlowUp)
        throw Error(Err::StepLimitExceeded, "state norm exceeded 1e12 at t = " + fmt_double(t));
}

}  // namespace

void validate(const FlowOptions& opts) {
    if (!(opts.dt > 0)) throw Error(Err::Usage, "dt must be positive");
    if (!(opts.abs_tol > 0) || !(opts.rel_tol > 0)) throw Error(Err::Usage, "tolerances must be positive");
    if (opts.max_steps <= 0) throw Error(Err::Usage, "max_steps must be positive");
}

OdeResult integrate(const OdeProblem& prob, double t0, const Vec& y0, double t1, const FlowOptions& opts,
                    const StepObserver& obs) {
    validate(opts);
    OdeResult r;
    r.t = t0;
    r.y = y0;
    if (t1 == t0) return r;
    check_state(prob, t0, y0);
    const double dir = t1 > t0 ? 1.0 : -1.0;
    const bool piecewise = prob.break_period > 0.0 && !prob.break_phases.empty();

    // Stage times are kept strictly inside the step when the field jumps in
    // time, so each step sees a single smooth piece.
    auto F = [&](double t, double h, double c, const Vec& y) {
        if (piecewise) {
            double eta = 1e-9 * std::abs(h);
            double off = std::clamp(c * std::abs(h), eta, std::abs(h) - eta);
            return prob.rhs(t + dir * off, y);
        }
        return prob.rhs(t + c * h, y);
    };

    double t = t0;
    Vec y = y0;

    if (opts.method == Method::RK4Fixed) {
        while (dir * (t1 - t) > 0) {
            if (r.steps >= opts.max_steps) throw Error(Err::StepLimitExceeded, "max_steps reached");
            double stop = next_break(prob, t, dir, t1);
            double h = dir * opts.dt;
            bool land = dir * (t + h - stop) >= 0;
            if (land) h = stop - t;
            Vec k1 = F(t, h, 0.0, y);
            Vec k2 = F(t, h, 0.5, y + 0.5 * h * k1);
            Vec k3 = F(t, h, 0.5, y + 0.5 * h * k2);
            Vec k4 = F(t, h, 1.0, y + h * k3);
            Vec yn = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
            double tn = land ? stop : t + h;
            ++r.steps;
            check_state(prob, tn, yn);
            bool go = !obs || obs(t, y, tn, yn);
            t = tn;
            y = std::move(yn);
            if (!go) {
                r.stopped = true;
                break;
            }
        }
        r.t = t;
        r.y = y;
        return r;
    }

    double h = dir * std::min(opts.dt, std::abs(t1 - t0));
    Vec k1 = F(t, h, 0.0, y);
    bool k1_valid = true;
    while (dir * (t1 - t) > 0) {
        if (r.steps >= opts.max_steps) throw Error(Err::StepLimitExceeded, "max_steps reached");
        double stop = next_break(prob, t, dir, t1);
        double h_try = h;
        bool land = dir * (t + h_try - stop) >= 0;
        if (land) h_try = stop - t;
        if (!k1_valid) k1 = F(t, h_try, 0.0, y);
        Vec k2 = F(t, h_try, c2, y + h_try * a21 * k1);
        Vec k3 = F(t, h_try, c3, y + h_try * (a31 * k1 + a32 * k2));
        Vec k4 = F(t, h_try, c4, y + h_try * (a41 * k1 + a42 * k2 + a43 * k3));
        Vec k5 = F(t, h_try, c5, y + h_try * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        Vec k6 = F(t, h_try, 1.0, y + h_try * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        Vec yn = y + h_try * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        Vec k7 = F(t, h_try, 1.0, yn);
        Vec err = h_try * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double en = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            double sc = opts.abs_tol + opts.rel_tol * std::max(std::abs(y[i]), std::abs(yn[i]));
            en = std::max(en, std::abs(err[i]) / sc);
        }
        if (!std::isfinite(en)) en = 1e10;
        ++r.steps;
        if (en <= 1.0) {
            double tn = land ? stop : t + h_try;
            check_state(prob, tn, yn);
            bool go = !obs || obs(t, y, tn, yn);
            t = tn;
            y = std::move(yn);
            if (piecewise) {
                k1_valid = false;
            } else {
                k1 = std::move(k7);
                k1_valid = true;
            }
            double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
            // A step shortened to land on a stop should not shrink the next one.
            h = land ? dir * std::max(std::abs(h), std::abs(h_try) * fac) : h_try * fac;
            if (!go) {
                r.stopped = true;
                break;
            }
        } else {
            h = h_try * std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.9);
            k1_valid = !piecewise;
            if (std::abs(h) < kMinStep)
                throw Error(Err::StepLimitExceeded, "adaptive step fell below 1e-14 at t = " + fmt_double(t));
        }
    }
    r.t = t;
    r.y = y;
    return r;
}

OdeProblem flow_problem(const SystemDef& sys) {
    if (sys.kind != Kind::Flow) throw Error(Err::Usage, sys.name + " is a map, not a flow");
    OdeProblem p;
    p.rhs = [&sys](double t, const Vec& x) { return evaluate_raw(sys, x, t); };
    if (!sys.autonomous && !sys.time_breaks.empty()) {
        p.break_period = sys.time_period;
        p.break_phases = sys.time_breaks;
    }
    return p;
}

Vec flow_to(const SystemDef& sys, const Vec& x0, double t, const FlowOptions& opts, double t0) {
    if (x0.size() != sys.dim) throw Error(Err::DimensionMismatch, sys.name + ": wrong state dimension");
    if (!std::isfinite(t)) throw Error(Err::Usage, "flow time must be finite");
    auto res = integrate(flow_problem(sys), t0, x0, t0 + t, opts);
    return reduce_periodic(sys, res.y);
}

Trajectory iterate_map(const SystemDef& sys, const Vec& x0, long n_iter, long sample_every) {
    if (sys.kind != Kind::Map) throw Error(Err::Usage, sys.name + " is a flow, not a map");
    if (x0.size() != sys.dim) throw Error(Err::DimensionMismatch, sys.name + ": wrong state dimension");
    if (n_iter < 0 || sample_every < 1) throw Error(Err::Usage, "iterate counts must be non-negative");
    Trajectory tr;
    Vec x = reduce_periodic(sys, x0);
    tr.times.push_back(0);
    tr.states.push_back(x);
    if (sys.model->exact_map) {
        std::vector<Rational> q;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            auto r = rationalize_strict(x[i]);
            if (!r) break;
            q.push_back(*r);
        }
        if (static_cast<int>(q.size()) == sys.dim) {
            for (long k = 1; k <= n_iter; ++k) {
                q = sys.model->exact_map(q);
                if (k % sample_every == 0 || k == n_iter) {
                    Vec v(sys.dim);
                    for (int i = 0; i < sys.dim; ++i) v[i] = to_double(q[i]);
                    tr.times.push_back(static_cast<double>(k));
                    tr.states.push_back(v);
                }
            }
            return tr;
        }
    }
    for (long k = 1; k <= n_iter; ++k) {
        x = reduce_periodic(sys, evaluate_raw(sys, x));
        if (!all_finite(x)) throw Error(Err::NonFiniteState, "iterate " + std::to_string(k) + " is non-finite");
        if (k % sample_every == 0 || k == n_iter) {
            tr.times.push_back(static_cast<double>(k));
            tr.states.push_back(x);
        }
    }
    return tr;
}

Trajectory trajectory(const SystemDef& sys, const Vec& x0, double t_end, double sample_every,
                      const FlowOptions& opts) {
    if (sys.kind == Kind::Map)
        return iterate_map(sys, x0, std::lround(t_end), std::max(1L, std::lround(sample_every)));
    if (x0.size() != sys.dim) throw Error(Err::DimensionMismatch, sys.name + ": wrong state dimension");
    if (!(sample_every > 0) || !(t_end >= 0)) throw Error(Err::Usage, "need t_end >= 0 and sample_every > 0");
    Trajectory tr;
    auto prob = flow_problem(sys);
    Vec x = x0;
    double t = 0.0;
    tr.times.push_back(0.0);
    tr.states.push_back(reduce_periodic(sys, x));
    long n = static_cast<long>(std::floor(t_end / sample_every + 1e-9));
    for (long k = 1; k <= n + 1; ++k) {
        double tk = k <= n ? k * sample_every : t_end;
        if (tk - t <= 1e-12 * std::max(1.0, t_end)) break;
        x = integrate(prob, t, x, tk, opts).y;
        t = tk;
        tr.times.push_back(t);
        tr.states.push_back(reduce_periodic(sys, x));
    }
    return tr;
}

VariationalResult variational_map(const SystemDef& sys, const Vec& x0, long n) {
    if (sys.kind != Kind::Map) throw Error(Err::Usage, sys.name + " is a flow, not a map");
    const int d = sys.dim;
    VariationalResult r;
    Vec x = reduce_periodic(sys, x0);
    r.U = Mat::Identity(d, d);
    for (long k = 0; k < n; ++k) {
        Mat J = jacobian_at(sys, x);
        r.logdetU += std::log(std::abs(J.determinant()));
        r.U = J * r.U;
        double m = r.U.cwiseAbs().maxCoeff();
        if (m > 1e100 || (m < 1e-100 && m > 0)) {
            r.U /= m;
            r.log_scale += std::log(m);
        }
        x = reduce_periodic(sys, evaluate_raw(sys, x));
        if (!all_finite(x)) throw Error(Err::NonFiniteState, "iterate " + std::to_string(k + 1) + " is non-finite");
    }
    r.x_final = x;
    return r;
}

VariationalResult variational_flow(const SystemDef& sys, const Vec& x0, double t, const FlowOptions& opts,
                                   double t0) {
    if (sys.kind == Kind::Map) return variational_map(sys, x0, std::lround(t));
    if (x0.size() != sys.dim) throw Error(Err::DimensionMismatch, sys.name + ": wrong state dimension");
    const int d = sys.dim;
    OdeProblem p = flow_problem(sys);
    p.norm_dims = d;
    p.rhs = [&sys, d](double tt, const Vec& y) {
        Vec x = y.head(d);
        Eigen::Map<const Mat> U(y.data() + d, d, d);
        Mat J = jacobian_at(sys, x, tt);
        Vec out(y.size());
        out.head(d) = evaluate_raw(sys, x, tt);
        Eigen::Map<Mat>(out.data() + d, d, d) = J * U;
        out[d + d * d] = J.trace();
        return out;
    };
    Vec y0 = Vec::Zero(d + d * d + 1);
    y0.head(d) = x0;
    Eigen::Map<Mat>(y0.data() + d, d, d) = Mat::Identity(d, d);
    // The tangent matrix is usually far from orthogonal, so det U loses
    // digits to cancellation; tighter tolerances keep log det U within 1e-8
    // of the Liouville integral.
    FlowOptions o = opts;
    o.abs_tol = std::min(opts.abs_tol, 1e-11);
    o.rel_tol = std::min(opts.rel_tol, 1e-11);
    auto res = integrate(p, t0, y0, t0 + t, o);
    VariationalResult r;
    r.x_final = reduce_periodic(sys, res.y.head(d));
    r.U = Eigen::Map<const Mat>(res.y.data() + d, d, d);
    r.logdetU = res.y[d + d * d];
    return r;
}

const char* omega_verdict_name(OmegaVerdict v) {
    switch (v) {
    case OmegaVerdict::FixedPoint: return "fixed_point";
    case OmegaVerdict::PeriodicLike: return "periodic_like";
    case OmegaVerdict::TorusLike: return "torus_like";
    case OmegaVerdict::Irregular: return "irregular";
    }
    return "irregular";
}

namespace {

double cloud_diameter(const SystemDef& sys, const std::vector<Vec>& cloud) {
    // Twice the largest distance from the first point bounds the diameter
    // within a factor 2, which is all the threshold test needs.
    double r = 0.0;
    for (const auto& x : cloud) r = std::max(r, state_distance(sys, x, cloud.front()));
    return r;
}

// Expansion of successor distances for close pairs of return points.
double recurrence_expansion(const std::vector<Vec>& pts) {
    if (pts.size() < 8) return 0.0;
    double diam = 0.0;
    for (const auto& p : pts) diam = std::max(diam, (p - pts.front()).norm());
    double close = 2e-2 * std::max(diam, 1e-12);
    double sum = 0.0;
    int cnt = 0;
    for (size_t i = 0; i + 1 < pts.size() && cnt < 2000; ++i)
        for (size_t j = i + 1; j + 1 < pts.size() && cnt < 2000; ++j) {
            double d0 = (pts[i] - pts[j]).norm();
            if (d0 > close || d0 == 0.0) continue;
            double d1 = (pts[i + 1] - pts[j + 1]).norm();
            sum += std::log(std::max(d1, 1e-300) / d0);
            ++cnt;
        }
    return cnt ? sum / cnt : 0.0;
}

}  // namespace

OmegaProbe omega_limit_probe(const SystemDef& sys, const Vec& x0, double t_transient, double t_sample,
                             const FlowOptions& opts) {
    OmegaProbe out;
    out.note = "heuristic verdict from sampled recurrence";
    if (sys.kind == Kind::Map) {
        auto tr = iterate_map(sys, x0, std::lround(t_transient));
        auto cl = iterate_map(sys, tr.states.back(), std::lround(t_sample));
        out.cloud = cl.states;
        out.diameter = cloud_diameter(sys, out.cloud);
        if (out.diameter < 1e-6) {
            out.verdict = OmegaVerdict::FixedPoint;
            return out;
        }
        const size_t N = out.cloud.size();
        out.return_distance = std::numeric_limits<double>::infinity();
        for (size_t k = 1; k <= 64 && k < N / 2; ++k) {
            double worst = 0.0;
            for (size_t i = N / 2; i + k < N; ++i)
                worst = std::max(worst, state_distance(sys, out.cloud[i], out.cloud[i + k]));
            out.return_distance = std::min(out.return_distance, worst);
            if (worst < 1e-4) {
                out.verdict = OmegaVerdict::PeriodicLike;
                out.period = static_cast<double>(k);
                return out;
            }
        }
        out.verdict = recurrence_expansion(out.cloud) > std::log(1.5) ? OmegaVerdict::Irregular
                                                                       : OmegaVerdict::TorusLike;
        return out;
    }

    Vec x = flow_to(sys, x0, t_transient, opts);
    double dt = std::max(1e-3, t_sample / 2e5);
    auto prob = flow_problem(sys);
    // Dense steps collected by the observer; the cloud keeps every accepted
    // step with spacing at most dt.
    std::vector<double> ts;
    std::vector<Vec> xs;
    ts.push_back(0.0);
    xs.push_back(x);
    FlowOptions o = opts;
    o.dt = std::min(o.dt, dt);
    double t = 0.0;
    long n = static_cast<long>(std::ceil(t_sample / dt));
    for (long k = 1; k <= n; ++k) {
        double tk = std::min(t_sample, k * dt);
        x = integrate(prob, t, x, tk, o).y;
        t = tk;
        ts.push_back(t);
        xs.push_back(x);
    }
    for (const auto& v : xs) out.cloud.push_back(reduce_periodic(sys, v));
    out.diameter = cloud_diameter(sys, out.cloud);
    if (out.diameter < 1e-6) {
        out.verdict = OmegaVerdict::FixedPoint;
        return out;
    }
    // Returns to the hyperplane through the first sample, normal to the flow.
    const Vec p0 = xs.front();
    Vec nrm = evaluate_raw(sys, p0);
    nrm /= nrm.norm();
    std::vector<double> ret_t;
    std::vector<Vec> ret_x;
    bool left = false;
    for (size_t i = 1; i < xs.size(); ++i) {
        if (state_distance(sys, xs[i], p0) > 1e-2 * out.diameter) left = true;
        double s0 = state_difference(sys, xs[i - 1], p0).dot(nrm);
        double s1 = state_difference(sys, xs[i], p0).dot(nrm);
        if (left && s0 < 0 && s1 >= 0) {
            double a = s0 / (s0 - s1);
            Vec xc = xs[i - 1] + a * state_difference(sys, xs[i], xs[i - 1]);
            ret_t.push_back(ts[i - 1] + a * (ts[i] - ts[i - 1]));
            ret_x.push_back(xc);
        }
    }
    out.return_distance = std::numeric_limits<double>::infinity();
    for (const auto& r : ret_x) out.return_distance = std::min(out.return_distance, state_distance(sys, r, p0));
    if (ret_t.size() >= 3) {
        // Consistent period: successive return intervals agree to 1%, and the
        // late returns all come back within 1e-4.
        bool all_close = true;
        double worst = 0.0;
        for (size_t i = ret_x.size() / 2; i < ret_x.size(); ++i)
            worst = std::max(worst, state_distance(sys, ret_x[i], p0));
        all_close = worst < 1e-4;
        double p1 = ret_t[ret_t.size() - 1] - ret_t[ret_t.size() - 2];
        double p2 = ret_t[ret_t.size() - 2] - ret_t[ret_t.size() - 3];
        if (all_close && std::abs(p1 - p2) <= 1e-2 * p1) {
            out.verdict = OmegaVerdict::PeriodicLike;
            out.period = p1;
            return out;
        }
    }
    out.verdict = recurrence_expansion(ret_x) > std::log(1.5) ? OmegaVerdict::Irregular : OmegaVerdict::TorusLike;
    return out;
}

std::string trajectory_csv(const SystemDef& sys, const Trajectory& tr) {
    std::string out = sys.kind == Kind::Map ? "k" : "t";
    for (int i = 1; i <= sys.dim; ++i) out += ",x" + std::to_string(i);
    out += '\n';
    for (size_t k = 0; k < tr.times.size(); ++k) {
        std::vector<double> row{tr.times[k]};
        for (Eigen::Index i = 0; i < tr.states[k].size(); ++i) row.push_back(tr.states[k][i]);
        out += csv_row(row);
    }
    return out;
}

}  // namespace dynkit
