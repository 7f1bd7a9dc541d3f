#include "dynkit/chaos.hpp"

#include "dynkit/io.hpp"
#include "dynkit/parallel.hpp"

#include <gmp.h>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>

namespace dynkit {

namespace {

// Q R = M with diag(R) >= 0; returns log diag(R).
Vec qr_step(Mat& Q, const Mat& M) {
    const int n = static_cast<int>(M.cols());
    Eigen::HouseholderQR<Mat> qr(M);
    Mat q = qr.householderQ() * Mat::Identity(M.rows(), n);
    Mat R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    Vec logs(n);
    for (int i = 0; i < n; ++i) {
        if (R(i, i) < 0) {
            q.col(i) = -q.col(i);
            R(i, i) = -R(i, i);
        }
        logs[i] = std::log(R(i, i));
    }
    Q = q;
    return logs;
}

}  // namespace

SpectrumResult lyapunov_spectrum(const SystemDef& sys, const Vec& x0, const SpectrumOptions& opts) {
    const int n = sys.dim;
    if (x0.size() != n) throw Error(Err::DimensionMismatch, "x0 dimension");
    if (!all_finite(x0)) throw Error(Err::NonFiniteState, "x0 is not finite");
    if (!(opts.discard_fraction >= 0 && opts.discard_fraction < 1)) throw Error(Err::Usage, "discard_fraction in [0, 1)");
    const bool flow = sys.kind == Kind::Flow;
    long steps;
    if (flow) {
        if (!(opts.T > 0 && opts.renorm_interval > 0)) throw Error(Err::Usage, "T and renorm_interval must be positive");
        steps = static_cast<long>(std::ceil(opts.T / opts.renorm_interval - 1e-12));
    } else {
        if (opts.N <= 0) throw Error(Err::Usage, "N must be positive");
        steps = opts.N;
    }
    const long discard = static_cast<long>(opts.discard_fraction * steps);
    const long kept = steps - discard;
    const long stride = std::max(1L, kept / 1000);
    const long three_quarters = discard + (3 * kept) / 4;

    SpectrumResult res;
    Vec x = x0;
    Mat Q = Mat::Identity(n, n);
    Vec sums = Vec::Zero(n);
    double t = 0.0, elapsed = 0.0;
    Vec snapshot;
    for (long k = 0; k < steps; ++k) {
        Vec logs;
        double dt;
        if (flow) {
            dt = std::min(opts.renorm_interval, opts.T - t);
            auto v = variational_flow(sys, x, dt, opts.flow, t);
            x = v.x_final;
            logs = qr_step(Q, v.U * Q);
            t += dt;
        } else {
            dt = 1.0;
            Mat J = jacobian_at(sys, x);
            x = evaluate(sys, x);
            logs = qr_step(Q, J * Q);
        }
        if (!all_finite(x)) throw Error(Err::NonFiniteState, "orbit left the finite range");
        if (k < discard) continue;
        sums += logs;
        elapsed += dt;
        if (k == three_quarters) snapshot = sums / elapsed;
        if ((k - discard) % stride == 0 || k == steps - 1) {
            Vec est = sums / elapsed;
            res.history.emplace_back(est.data(), est.data() + n);
        }
    }
    Vec est = sums / elapsed;
    res.exponents.assign(est.data(), est.data() + n);
    std::sort(res.exponents.begin(), res.exponents.end(), std::greater<>());
    res.sum = est.sum();
    if (flow) res.T_total = elapsed;
    else res.N_total = static_cast<long>(elapsed);
    if (snapshot.size() == n) {
        double scale = std::max(est.cwiseAbs().maxCoeff(), 1e-12);
        res.unconverged = (est - snapshot).cwiseAbs().maxCoeff() > 0.05 * scale;
    }
    res.x_final = x;
    return res;
}

nlohmann::json spectrum_json(const SpectrumResult& r) {
    nlohmann::json j;
    j["exponents"] = r.exponents;
    j["sum"] = r.sum;
    j["history"] = r.history;
    if (r.T_total > 0) j["T_total"] = r.T_total;
    if (r.N_total > 0) j["N_total"] = r.N_total;
    j["unconverged"] = r.unconverged;
    return j;
}

std::vector<double> geometric_ladder(double base, int k_lo, int k_hi) {
    std::vector<double> out;
    for (int k = k_lo; k <= k_hi; ++k) out.push_back(std::pow(base, -k));
    return out;
}

namespace {

struct CellHash {
    size_t operator()(const std::vector<long long>& v) const {
        size_t h = 1469598103934665603ULL;
        for (long long c : v) h = (h ^ static_cast<size_t>(c)) * 1099511628211ULL;
        return h;
    }
};

struct Fit {
    double slope, r2;
};

Fit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double m = static_cast<double>(xs.size());
    double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / m, my = std::accumulate(ys.begin(), ys.end(), 0.0) / m;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    double slope = sxy / sxx;
    double r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return {slope, r2};
}

template <class Loop>
DimensionEstimate box_impl(const std::vector<Vec>& pts, const std::vector<double>& eps, Loop loop) {
    if (pts.size() < 1000) throw Error(Err::Usage, "box counting needs at least 1000 points");
    if (eps.size() < 4) throw Error(Err::Usage, "the eps ladder needs at least 4 rungs");
    const double ratio = eps[1] / eps[0];
    for (size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0)) throw Error(Err::Usage, "eps must be positive");
        if (i && std::abs(eps[i] / eps[i - 1] - ratio) > 1e-9 * ratio)
            throw Error(Err::Usage, "eps ladder must be geometric");
    }
    if (std::abs(ratio - 1) < 1e-12) throw Error(Err::Usage, "eps ladder must be geometric");
    const int d = static_cast<int>(pts[0].size());
    Vec lo = pts[0], hi = pts[0];
    for (const Vec& p : pts) {
        if (p.size() != d) throw Error(Err::DimensionMismatch, "points differ in dimension");
        if (!all_finite(p)) throw Error(Err::NonFiniteState, "point cloud has non-finite entries");
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    if ((hi - lo).maxCoeff() <= 0) throw Error(Err::DegenerateCloud, "point cloud has zero diameter");

    // Offsets shift the grid by a quarter cell. A point on a cell face (within
    // 1e-9 cells) lies in both closed cells and counts only when neither is
    // occupied by another point; the unshifted grid has ceil(extent / eps)
    // cells per axis, so the top face of the box stays inside.
    constexpr int n_off = 4;
    const int m = static_cast<int>(eps.size());
    std::vector<long> counts(n_off * m);
    loop(n_off * m, [&](int task) {
        int o = task / m, e = task % m;
        const double shift = 0.25 * o;
        std::vector<long long> top(d);
        for (int i = 0; i < d; ++i)
            top[i] = o == 0 ? std::max(0LL, static_cast<long long>(std::ceil((hi[i] - lo[i]) / eps[e] - 1e-9)) - 1)
                            : std::numeric_limits<long long>::max();
        std::unordered_set<std::vector<long long>, CellHash> cells;
        std::vector<std::pair<std::vector<long long>, std::vector<int>>> on_face;
        std::vector<long long> key(d);
        std::vector<int> face_axes;
        for (const Vec& p : pts) {
            face_axes.clear();
            for (int i = 0; i < d; ++i) {
                double u = (p[i] - lo[i]) / eps[e] + shift;
                double r = std::round(u);
                if (std::abs(u - r) < 1e-9) {
                    key[i] = static_cast<long long>(r);
                    if (key[i] > 0 && key[i] <= top[i]) face_axes.push_back(i);
                } else {
                    key[i] = static_cast<long long>(std::floor(u));
                }
                key[i] = std::min(key[i], top[i]);
            }
            if (face_axes.empty()) cells.insert(key);
            else on_face.emplace_back(key, face_axes);
        }
        for (auto& [k, axes] : on_face) {
            const int na = static_cast<int>(axes.size());
            bool covered = false;
            std::vector<long long> c = k;
            for (long mask = 0; mask < (1L << na) && !covered; ++mask) {
                for (int j = 0; j < na; ++j) c[axes[j]] = k[axes[j]] - ((mask >> j) & 1);
                covered = cells.count(c) > 0;
            }
            if (!covered) cells.insert(k);
        }
        counts[task] = static_cast<long>(cells.size());
    });
    DimensionEstimate out;
    out.eps = eps;
    std::vector<double> xs(m), ys(m);
    for (int e = 0; e < m; ++e) {
        long best = counts[e];
        for (int o = 1; o < n_off; ++o) best = std::min(best, counts[o * m + e]);
        out.counts.push_back(best);
        xs[e] = std::log(1 / eps[e]);
        ys[e] = std::log(static_cast<double>(best));
    }
    Fit f = least_squares(xs, ys);
    out.slope = f.slope;
    out.r2 = f.r2;
    return out;
}

}  // namespace

DimensionEstimate box_dimension(const std::vector<Vec>& points, const std::vector<double>& eps) {
    return box_impl(points, eps, [](int n, auto f) { parallel_for(n, f); });
}

DimensionEstimate box_dimension_serial(const std::vector<Vec>& points, const std::vector<double>& eps) {
    return box_impl(points, eps, [](int n, auto f) { serial_for(n, f); });
}

namespace {

Vec probe_direction(int dim, unsigned seed, int k) {
    std::mt19937_64 rng(static_cast<uint64_t>(seed) * 1000003ULL + static_cast<uint64_t>(k));
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec u(dim);
    do {
        for (int i = 0; i < dim; ++i) u[i] = n01(rng);
    } while (u.norm() == 0);
    return u.normalized();
}

double divergence_time(const SystemDef& sys, const Vec& x, const Vec& y, double eps, double T_max,
                       const FlowOptions& opts) {
    const int n = sys.dim;
    if (sys.kind == Kind::Map) {
        Vec a = x, b = y;
        const long N = static_cast<long>(T_max);
        for (long k = 0; k <= N; ++k) {
            if (!all_finite(a) || !all_finite(b)) throw Error(Err::NonFiniteState, "orbit left the finite range");
            if (state_distance(sys, a, b) >= eps) return static_cast<double>(k);
            a = evaluate(sys, a);
            b = evaluate(sys, b);
        }
        return -1;
    }
    OdeProblem base = flow_problem(sys);
    OdeProblem pair = base;
    pair.rhs = [base, n](double t, const Vec& z) {
        Vec out(2 * n);
        out.head(n) = base.rhs(t, z.head(n));
        out.tail(n) = base.rhs(t, z.tail(n));
        return out;
    };
    Vec z(2 * n);
    z << x, y;
    if (state_distance(sys, x, y) >= eps) return 0.0;
    double hit = -1;
    integrate(pair, 0.0, z, T_max, opts, [&](double, const Vec&, double t, const Vec& s) {
        if (!all_finite(s)) throw Error(Err::NonFiniteState, "orbit left the finite range");
        if (state_distance(sys, s.head(n), s.tail(n)) >= eps) {
            hit = t;
            return false;
        }
        return true;
    });
    return hit;
}

template <class Loop>
SensitivityResult sensitivity_impl(const SystemDef& sys, const Vec& x, double delta0, double eps, double T_max,
                                   int n_probes, const FlowOptions& opts, unsigned seed, Loop loop) {
    if (!(delta0 > 0)) throw Error(Err::Usage, "delta0 must be positive");
    if (!(eps > 0 && T_max > 0) || n_probes < 1) throw Error(Err::Usage, "eps, T_max and n_probes must be positive");
    if (x.size() != sys.dim) throw Error(Err::DimensionMismatch, "x dimension");
    SensitivityResult r;
    r.divergence_times.assign(n_probes, -1.0);
    loop(n_probes, [&](int k) {
        Vec y = x + delta0 * probe_direction(sys.dim, seed, k);
        r.divergence_times[k] = divergence_time(sys, x, y, eps, T_max, opts);
    });
    for (double t : r.divergence_times) r.sensitive |= t >= 0;
    return r;
}

}  // namespace

SensitivityResult sensitivity_test(const SystemDef& sys, const Vec& x, double delta0, double eps_target, double T_max,
                                   int n_probes, const FlowOptions& opts, unsigned seed) {
    return sensitivity_impl(sys, x, delta0, eps_target, T_max, n_probes, opts, seed,
                            [](int n, auto f) { parallel_for(n, f); });
}

SensitivityResult sensitivity_test_serial(const SystemDef& sys, const Vec& x, double delta0, double eps_target,
                                          double T_max, int n_probes, const FlowOptions& opts, unsigned seed) {
    return sensitivity_impl(sys, x, delta0, eps_target, T_max, n_probes, opts, seed,
                            [](int n, auto f) { serial_for(n, f); });
}

long divergence_iterates_exact(const SystemDef& sys, const Rational& x, const Rational& y, const Rational& eps_target,
                               long n_max) {
    if (sys.dim != 1 || !sys.model || !sys.model->exact_map) throw Error(Err::Usage, "system has no exact map");
    std::vector<Rational> a{x}, b{y};
    for (long k = 0; k <= n_max; ++k) {
        Rational d = a[0] - b[0];
        if (d < 0) d = -d;
        if (d >= eps_target) return k;
        a = sys.model->exact_map(a);
        b = sys.model->exact_map(b);
    }
    return -1;
}

namespace {

ErgodicAverage summarize(const std::vector<double>& vals, double reference) {
    ErgodicAverage r;
    r.N = static_cast<long>(vals.size());
    r.reference = reference;
    double s = 0;
    for (double v : vals) s += v;
    r.mean = s / r.N;
    const long B = std::min<long>(100, r.N);
    const long size = r.N / B;
    std::vector<double> means(B, 0.0);
    for (long b = 0; b < B; ++b) {
        double t = 0;
        for (long i = b * size; i < (b + 1) * size; ++i) t += vals[i];
        means[b] = t / size;
    }
    double mb = std::accumulate(means.begin(), means.end(), 0.0) / B, v = 0;
    for (double m : means) v += (m - mb) * (m - mb);
    r.stderr_ = B > 1 ? std::sqrt(v / (B - 1) / B) : 0.0;
    return r;
}

// 3^38 < 2^63, so 2a stays inside uint64.
constexpr uint64_t kTentDen = 1350851717672992089ULL;

ErgodicAverage tent_grid_average(uint64_t a, const std::function<double(double)>& phi, long N, double reference) {
    if (N <= 0) throw Error(Err::Usage, "N must be positive");
    std::vector<double> vals(N);
    const long double q = static_cast<long double>(kTentDen);
    for (long k = 0; k < N; ++k) {
        vals[k] = phi(static_cast<double>(static_cast<long double>(a) / q));
        a = 2 * a <= kTentDen ? 2 * a : 2 * kTentDen - 2 * a;
    }
    return summarize(vals, reference);
}

}  // namespace

ErgodicAverage ergodic_average(const SystemDef& sys, double x0, const std::function<double(double)>& phi, long N,
                               double reference) {
    if (sys.dim != 1 || sys.kind != Kind::Map) throw Error(Err::Usage, "ergodic averages need a one-dimensional map");
    if (N <= 0) throw Error(Err::Usage, "N must be positive");
    std::vector<double> vals(N);
    Vec x = Vec::Constant(1, x0);
    for (long k = 0; k < N; ++k) {
        vals[k] = phi(x[0]);
        x = evaluate(sys, x);
        if (!all_finite(x)) throw Error(Err::NonFiniteState, "orbit left the finite range");
    }
    return summarize(vals, reference);
}

ErgodicAverage tent_ergodic_average(double x0, const std::function<double(double)>& phi, long N, double reference) {
    if (!(x0 >= 0 && x0 <= 1)) throw Error(Err::Usage, "x0 must lie in [0, 1]");
    long double a = std::floor(static_cast<long double>(x0) * static_cast<long double>(kTentDen));
    return tent_grid_average(static_cast<uint64_t>(a), phi, N, reference);
}

ErgodicAverage tent_ergodic_average_sqrt2(const std::function<double(double)>& phi, long N, double reference) {
    // floor((sqrt 2 - 1) q) = isqrt(2 q^2) - q
    mpz_t q, s;
    mpz_init_set_ui(q, kTentDen);
    mpz_init(s);
    mpz_mul(s, q, q);
    mpz_mul_ui(s, s, 2);
    mpz_sqrt(s, s);
    mpz_sub(s, s, q);
    uint64_t a = mpz_get_ui(s);
    mpz_clear(q);
    mpz_clear(s);
    return tent_grid_average(a, phi, N, reference);
}

HenonExperiment henon_attractor_experiment(double lambda, double b, long N, long transient) {
    if (N <= 0 || transient < 0) throw Error(Err::Usage, "N must be positive and transient nonnegative");
    SystemDef sys = build_builtin("henon", {{"lambda", lambda}, {"b", b}});
    HenonExperiment ex;
    Vec x = Vec::Zero(2);
    auto step = [&] {
        x = evaluate(sys, x);
        if (!all_finite(x) || x.norm() > 1e6) throw Error(Err::Escaped, "orbit escaped (norm above 1e6)");
    };
    for (long k = 0; k < transient; ++k) step();
    Vec start = x;
    ex.box_lo = ex.box_hi = x;
    ex.points.reserve(N);
    for (long k = 0; k < N; ++k) {
        step();
        ex.points.push_back(x);
        ex.box_lo = ex.box_lo.cwiseMin(x);
        ex.box_hi = ex.box_hi.cwiseMax(x);
    }
    if (b != 0) {
        SpectrumOptions o;
        o.N = N;
        ex.spectrum = lyapunov_spectrum(sys, start, o);
    }
    return ex;
}

std::string point_cloud_csv(const std::vector<Vec>& pts) {
    std::string s;
    const int d = pts.empty() ? 0 : static_cast<int>(pts[0].size());
    for (int i = 0; i < d; ++i) s += (i ? ",x" : "x") + std::to_string(i + 1);
    s += '\n';
    for (const Vec& p : pts) s += csv_row(std::vector<double>(p.data(), p.data() + p.size()));
    return s;
}

namespace {

struct Fate {
    int settled;  // +1 C+, -1 C-, 0 neither
    int switches;
};

Fate lorenz_fate(const SystemDef& sys, double r, const Vec& x0, double T, const FlowOptions& opts) {
    const double b = sys.param("b");
    Vec cp{{std::sqrt(b * (r - 1)), std::sqrt(b * (r - 1)), r - 1}};
    Vec cm{{-cp[0], -cp[1], r - 1}};
    int sign = 0, switches = 0;
    OdeResult res = integrate(flow_problem(sys), 0.0, x0, T, opts, [&](double, const Vec&, double, const Vec& y) {
        // Count lobe changes only once the orbit is clearly on one side.
        if (std::abs(y[0]) > 1e-3) {
            int s = y[0] > 0 ? 1 : -1;
            if (sign != 0 && s != sign) ++switches;
            sign = s;
        }
        return true;
    });
    const double tol = 1e-2 * (1 + cp.norm());
    int settled = 0;
    if (r > 1) {
        if ((res.y - cp).norm() < tol) settled = 1;
        else if ((res.y - cm).norm() < tol) settled = -1;
    }
    return {settled, switches};
}

template <class Loop>
LorenzFates fates_impl(double r, const std::vector<Vec>& seeds, double T, const FlowOptions& opts, Loop loop) {
    if (seeds.empty()) throw Error(Err::Usage, "no seeds");
    SystemDef sys = build_builtin("lorenz", {{"r", r}});
    std::vector<Fate> f(seeds.size());
    loop(static_cast<int>(seeds.size()), [&](int i) { f[i] = lorenz_fate(sys, r, seeds[i], T, opts); });
    LorenzFates out;
    const double m = static_cast<double>(seeds.size());
    long plus = 0, minus = 0, none = 0, switches = 0;
    for (const Fate& x : f) {
        ++(x.settled > 0 ? plus : x.settled < 0 ? minus : none);
        switches += x.switches;
    }
    out.to_cplus = plus / m;
    out.to_cminus = minus / m;
    out.unsettled = none / m;
    out.mean_switches = switches / m;
    return out;
}

}  // namespace

LorenzFates lorenz_orbit_fates(double r, const std::vector<Vec>& seeds, double T, const FlowOptions& opts) {
    return fates_impl(r, seeds, T, opts, [](int n, auto f) { parallel_for(n, f); });
}

LorenzFates lorenz_orbit_fates_serial(double r, const std::vector<Vec>& seeds, double T, const FlowOptions& opts) {
    return fates_impl(r, seeds, T, opts, [](int n, auto f) { serial_for(n, f); });
}

int lorenz_unstable_branch_fate(double r, double T, const FlowOptions& opts) {
    if (!(r > 1)) throw Error(Err::Usage, "the origin has an unstable manifold only for r > 1");
    SystemDef sys = build_builtin("lorenz", {{"r", r}});
    const double s = sys.param("sigma");
    // Unstable eigenvector of the (x1, x2) block [[-s, s], [r, -1]].
    double mu = 0.5 * (-(s + 1) + std::sqrt((s + 1) * (s + 1) + 4 * s * (r - 1)));
    Vec v{{s, mu + s, 0}};
    Vec x0 = 1e-7 * v.normalized();
    return lorenz_fate(sys, r, x0, T, opts).settled;
}

double lorenz_homoclinic_estimate(double r_lo, double r_hi, double tol, const FlowOptions& opts) {
    int f_lo = lorenz_unstable_branch_fate(r_lo, 200.0, opts);
    int f_hi = lorenz_unstable_branch_fate(r_hi, 200.0, opts);
    if (f_lo == f_hi || f_lo == 0 || f_hi == 0)
        throw Error(Err::Usage, "unstable branch fate does not change across the bracket");
    while (r_hi - r_lo > tol) {
        double m = 0.5 * (r_lo + r_hi);
        int f = lorenz_unstable_branch_fate(m, 200.0, opts);
        if (f == 0) throw Error(Err::NoConvergence, "unstable branch did not settle at r = " + fmt_double(m));
        (f == f_lo ? r_lo : r_hi) = m;
    }
    return 0.5 * (r_lo + r_hi);
}

}  // namespace dynkit
