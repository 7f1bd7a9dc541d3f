#include "dynkit/systems.hpp"

#include <cmath>
#include <numbers>

namespace dynkit {

namespace {

constexpr double kPi = std::numbers::pi;

MultiIndex mi(std::initializer_list<int> l) { return MultiIndex(l); }

std::shared_ptr<CompiledPoly> compile(const TaylorMap<Rational>& f) {
    auto c = std::make_shared<CompiledPoly>();
    c->f = to_double_map(f);
    auto comps = f.components();
    for (int i = 0; i < f.in_dim; ++i) {
        std::vector<PolyS<Rational>> d;
        for (const auto& p : comps) d.push_back(poly_diff(p, i));
        c->df.push_back(to_double_map(TaylorMap<Rational>::from_components(f.in_dim, d)));
    }
    return c;
}

std::vector<double> to_std(const Vec& x) { return std::vector<double>(x.data(), x.data() + x.size()); }

Vec eval_compiled(const CompiledPoly& c, const Vec& x) {
    auto v = c.f.eval(to_std(x));
    return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Mat jac_compiled(const CompiledPoly& c, const Vec& x) {
    const int n = static_cast<int>(c.df.size());
    Mat J(c.f.out_dim, n);
    auto xs = to_std(x);
    for (int i = 0; i < n; ++i) {
        auto col = c.df[i].eval(xs);
        for (int j = 0; j < c.f.out_dim; ++j) J(j, i) = col[j];
    }
    return J;
}

void refresh(SystemDef& s) {
    if (s.period_param >= 0) s.time_period = s.params[s.period_param].value;
    if (s.model && s.model->poly && !s.model->f) {
        auto q = rational_params(s);
        s.compiled = compile(s.model->poly(*q));
    }
}

double pos_mod(double a, double p) {
    double r = std::fmod(a, p);
    if (r < 0) r += p;
    if (r >= p) r -= p;
    return r;
}

SystemDef make(const std::string& name, Kind kind, int dim, std::vector<ParamSpec> params,
               std::shared_ptr<Model> model) {
    SystemDef s;
    s.name = name;
    s.kind = kind;
    s.dim = dim;
    s.params = std::move(params);
    s.model = std::move(model);
    return s;
}

SystemDef standard_map() {
    auto m = std::make_shared<Model>();
    m->f = [](double, const Vec& x, const Vec& p) {
        Vec y(2);
        y[1] = x[1] - p[0] * std::sin(x[0]);
        y[0] = x[0] + y[1];
        return y;
    };
    m->jac = [](double, const Vec& x, const Vec& p) {
        double c = p[0] * std::cos(x[0]);
        Mat J(2, 2);
        J << 1 - c, 1, -c, 1;
        return J;
    };
    m->dfdp = [](double, const Vec& x, const Vec&, int) {
        Vec d(2);
        d << -std::sin(x[0]), -std::sin(x[0]);
        return d;
    };
    auto s = make("standard_map", Kind::Map, 2, {{"epsilon", 0.5, {}}}, m);
    s.periodic_coords = {{0, 2 * kPi}};
    return s;
}

template <class S>
TaylorMap<S> lorenz_poly(const S& sigma, const S& b, const S& r) {
    TaylorMap<S> f(3, 3);
    f.add(mi({1, 0, 0}), 0, -sigma);
    f.add(mi({0, 1, 0}), 0, sigma);
    f.add(mi({1, 0, 0}), 1, r);
    f.add(mi({0, 1, 0}), 1, S(-1));
    f.add(mi({1, 0, 1}), 1, S(-1));
    f.add(mi({0, 0, 1}), 2, -b);
    f.add(mi({1, 1, 0}), 2, S(1));
    return f;
}

SystemDef lorenz() {
    auto m = std::make_shared<Model>();
    m->f = [](double, const Vec& x, const Vec& p) {
        Vec y(3);
        y << p[0] * (x[1] - x[0]), p[2] * x[0] - x[1] - x[0] * x[2], x[0] * x[1] - p[1] * x[2];
        return y;
    };
    m->jac = [](double, const Vec& x, const Vec& p) {
        Mat J(3, 3);
        J << -p[0], p[0], 0, p[2] - x[2], -1, -x[0], x[1], x[0], -p[1];
        return J;
    };
    m->div = [](double, const Vec&, const Vec& p) { return -(p[0] + 1 + p[1]); };
    m->dfdp = [](double, const Vec& x, const Vec&, int k) {
        Vec d = Vec::Zero(3);
        if (k == 0) d[0] = x[1] - x[0];
        if (k == 1) d[2] = -x[2];
        if (k == 2) d[1] = x[0];
        return d;
    };
    m->poly = [](const std::vector<Rational>& p) { return lorenz_poly(p[0], p[1], p[2]); };
    return make("lorenz", Kind::Flow, 3, {{"sigma", 10.0, {}}, {"b", 8.0 / 3.0, {}}, {"r", 28.0, {}}}, m);
}

SystemDef logistic() {
    auto m = std::make_shared<Model>();
    m->f = [](double, const Vec& x, const Vec& p) { return Vec::Constant(1, p[0] * x[0] * (1 - x[0])); };
    m->jac = [](double, const Vec& x, const Vec& p) { return Mat::Constant(1, 1, p[0] * (1 - 2 * x[0])); };
    m->dfdp = [](double, const Vec& x, const Vec&, int) { return Vec::Constant(1, x[0] * (1 - x[0])); };
    m->poly = [](const std::vector<Rational>& p) {
        TaylorMap<Rational> f(1, 1);
        f.add(mi({1}), 0, p[0]);
        f.add(mi({2}), 0, -p[0]);
        return f;
    };
    return make("logistic", Kind::Map, 1, {{"lambda", 4.0, std::make_pair(0.0, 4.0)}}, m);
}

SystemDef tent(const std::string& name, double slope) {
    auto m = std::make_shared<Model>();
    m->f = [slope](double, const Vec& x, const Vec&) {
        return Vec::Constant(1, x[0] <= 0.5 ? slope * x[0] : slope - slope * x[0]);
    };
    m->jac = [slope](double, const Vec& x, const Vec&) { return Mat::Constant(1, 1, x[0] <= 0.5 ? slope : -slope); };
    m->exact_map = [slope](const std::vector<Rational>& x) {
        Rational s = rationalize(slope);
        Rational y = x[0] <= Rational(1, 2) ? Rational(s * x[0]) : Rational(s - s * x[0]);
        return std::vector<Rational>{y};
    };
    return make(name, Kind::Map, 1, {}, m);
}

SystemDef henon() {
    auto m = std::make_shared<Model>();
    m->f = [](double, const Vec& x, const Vec& p) {
        Vec y(2);
        y << 1 - p[0] * x[0] * x[0] + x[1], p[1] * x[0];
        return y;
    };
    m->jac = [](double, const Vec& x, const Vec& p) {
        Mat J(2, 2);
        J << -2 * p[0] * x[0], 1, p[1], 0;
        return J;
    };
    m->dfdp = [](double, const Vec& x, const Vec&, int k) {
        Vec d = Vec::Zero(2);
        if (k == 0) d[0] = -x[0] * x[0];
        else d[1] = x[0];
        return d;
    };
    m->poly = [](const std::vector<Rational>& p) {
        TaylorMap<Rational> f(2, 2);
        f.add(mi({0, 0}), 0, Rational(1));
        f.add(mi({2, 0}), 0, -p[0]);
        f.add(mi({0, 1}), 0, Rational(1));
        f.add(mi({1, 0}), 1, p[1]);
        return f;
    };
    return make("henon", Kind::Map, 2, {{"lambda", 1.4, {}}, {"b", 0.3, {}}}, m);
}

SystemDef duffing_forced() {
    auto m = std::make_shared<Model>();
    m->f = [](double, const Vec& x, const Vec& p) {
        Vec y(3);
        y << x[1], x[0] - x[0] * x[0] * x[0] + p[0] * std::sin(2 * kPi * x[2]), 1.0;
        return y;
    };
    m->jac = [](double, const Vec& x, const Vec& p) {
        Mat J = Mat::Zero(3, 3);
        J(0, 1) = 1;
        J(1, 0) = 1 - 3 * x[0] * x[0];
        J(1, 2) = 2 * kPi * p[0] * std::cos(2 * kPi * x[2]);
        return J;
    };
    m->div = [](double, const Vec&, const Vec&) { return 0.0; };
    m->dfdp = [](double, const Vec& x, const Vec&, int) {
        Vec d = Vec::Zero(3);
        d[1] = std::sin(2 * kPi * x[2]);
        return d;
    };
    auto s = make("duffing_forced", Kind::Flow, 3, {{"epsilon", 0.0, {}}}, m);
    s.periodic_coords = {{2, 1.0}};
    return s;
}

SystemDef van_der_pol() {
    auto m = std::make_shared<Model>();
    m->f = [](double, const Vec& x, const Vec& p) {
        Vec y(2);
        y << x[1] + p[0] * x[0] - x[0] * x[0] * x[0] / 3.0, -x[0];
        return y;
    };
    m->jac = [](double, const Vec& x, const Vec& p) {
        Mat J(2, 2);
        J << p[0] - x[0] * x[0], 1, -1, 0;
        return J;
    };
    m->dfdp = [](double, const Vec& x, const Vec&, int) {
        Vec d(2);
        d << x[0], 0;
        return d;
    };
    m->poly = [](const std::vector<Rational>& p) {
        TaylorMap<Rational> f(2, 2);
        f.add(mi({0, 1}), 0, Rational(1));
        f.add(mi({1, 0}), 0, p[0]);
        f.add(mi({3, 0}), 0, Rational(-1, 3));
        f.add(mi({1, 0}), 1, Rational(-1));
        return f;
    };
    return make("van_der_pol", Kind::Flow, 2, {{"lambda", 1.0, {}}}, m);
}

SystemDef hill() {
    auto m = std::make_shared<Model>();
    auto omega = [](double t, const Vec& p) { return pos_mod(t, p[0]) < 0.5 * p[0] ? p[1] : 1.0; };
    m->f = [omega](double t, const Vec& x, const Vec& p) {
        double w = omega(t, p);
        Vec y(2);
        y << x[1], -w * w * x[0];
        return y;
    };
    m->jac = [omega](double t, const Vec&, const Vec& p) {
        double w = omega(t, p);
        Mat J(2, 2);
        J << 0, 1, -w * w, 0;
        return J;
    };
    m->div = [](double, const Vec&, const Vec&) { return 0.0; };
    auto s = make("hill", Kind::Flow, 2,
                  {{"T", kPi, std::make_pair(0.0, 1e6)}, {"Omega", 2.0, std::make_pair(0.0, 1e6)}}, m);
    s.autonomous = false;
    s.period_param = 0;
    s.time_period = kPi;
    s.time_breaks = {0.0, 0.5};  // fractions of the period
    return s;
}

SystemDef pitchfork_demo() {
    auto m = std::make_shared<Model>();
    m->f = [](double, const Vec& x, const Vec& p) {
        Vec y(2);
        y << p[0] * x[0] - x[0] * x[0] * x[0], -x[1];
        return y;
    };
    m->jac = [](double, const Vec& x, const Vec& p) {
        Mat J(2, 2);
        J << p[0] - 3 * x[0] * x[0], 0, 0, -1;
        return J;
    };
    m->dfdp = [](double, const Vec& x, const Vec&, int) {
        Vec d(2);
        d << x[0], 0;
        return d;
    };
    m->poly = [](const std::vector<Rational>& p) {
        TaylorMap<Rational> f(2, 2);
        f.add(mi({1, 0}), 0, p[0]);
        f.add(mi({3, 0}), 0, Rational(-1));
        f.add(mi({0, 1}), 1, Rational(-1));
        return f;
    };
    return make("pitchfork_demo", Kind::Flow, 2, {{"lambda", 1.0, {}}}, m);
}

SystemDef linear_builtin(const ParamTable& overrides) {
    int n = 2;
    if (auto it = overrides.find("n"); it != overrides.end()) {
        n = static_cast<int>(it->second);
        if (n < 1 || n > 9 || it->second != n) throw Error(Err::UnknownParam, "linear: n must be an integer in [1, 9]");
    }
    Mat A = -Mat::Identity(n, n);
    for (const auto& [k, v] : overrides) {
        if (k == "n") continue;
        bool ok = k.size() == 3 && k[0] == 'a' && k[1] >= '1' && k[2] >= '1' && k[1] - '0' <= n && k[2] - '0' <= n;
        if (!ok) throw Error(Err::UnknownParam, "linear has no parameter '" + k + "'");
        A(k[1] - '1', k[2] - '1') = v;
    }
    return linear_system(A);
}

}  // namespace

Vec SystemDef::param_vector() const {
    Vec p(static_cast<Eigen::Index>(params.size()));
    for (size_t i = 0; i < params.size(); ++i) p[static_cast<Eigen::Index>(i)] = params[i].value;
    return p;
}

int SystemDef::param_index(const std::string& pname) const {
    for (size_t i = 0; i < params.size(); ++i)
        if (params[i].name == pname) return static_cast<int>(i);
    throw Error(Err::UnknownParam, name + " has no parameter '" + pname + "'");
}

double SystemDef::param(const std::string& pname) const { return params[param_index(pname)].value; }

std::vector<std::string> builtin_names() {
    return {"standard_map", "lorenz", "logistic", "tent",           "tent3", "henon",
            "duffing_forced", "van_der_pol", "hill", "pitchfork_demo", "linear"};
}

SystemDef build_builtin(const std::string& name, const ParamTable& overrides) {
    SystemDef s;
    if (name == "standard_map") s = standard_map();
    else if (name == "lorenz") s = lorenz();
    else if (name == "logistic") s = logistic();
    else if (name == "tent") s = tent("tent", 2.0);
    else if (name == "tent3") s = tent("tent3", 3.0);
    else if (name == "henon") s = henon();
    else if (name == "duffing_forced") s = duffing_forced();
    else if (name == "van_der_pol") s = van_der_pol();
    else if (name == "hill") s = hill();
    else if (name == "pitchfork_demo") s = pitchfork_demo();
    else if (name == "linear") return linear_builtin(overrides);
    else throw Error(Err::UnknownSystem, "no builtin system named '" + name + "'");
    return with_params(s, overrides);
}

SystemDef with_params(const SystemDef& sys, const ParamTable& overrides) {
    SystemDef s = sys;
    for (const auto& [k, v] : overrides) {
        auto& ps = s.params[s.param_index(k)];
        if (ps.range && (v < ps.range->first || v > ps.range->second))
            throw Error(Err::UnknownParam, "parameter '" + k + "' outside its declared range");
        ps.value = v;
    }
    refresh(s);
    return s;
}

SystemDef with_param(const SystemDef& sys, const std::string& name, double value) {
    return with_params(sys, {{name, value}});
}

Vec evaluate_raw(const SystemDef& sys, const Vec& x, double t) {
    if (x.size() != sys.dim)
        throw Error(Err::DimensionMismatch,
                    sys.name + " expects dimension " + std::to_string(sys.dim) + ", got " + std::to_string(x.size()));
    if (sys.compiled) return eval_compiled(*sys.compiled, x);
    return sys.model->f(t, x, sys.param_vector());
}

Vec evaluate(const SystemDef& sys, const Vec& x, double t) {
    Vec y = evaluate_raw(sys, reduce_periodic(sys, x), t);
    return sys.kind == Kind::Map ? reduce_periodic(sys, y) : y;
}

Mat jacobian_fd(const SystemDef& sys, const Vec& x, double t) {
    Mat J(sys.dim, sys.dim);
    for (int i = 0; i < sys.dim; ++i) {
        double h = std::max(1e-6, 1e-6 * std::abs(x[i]));
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        J.col(i) = (evaluate_raw(sys, xp, t) - evaluate_raw(sys, xm, t)) / (2 * h);
    }
    return J;
}

Mat jacobian_at(const SystemDef& sys, const Vec& x, double t) {
    if (x.size() != sys.dim) throw Error(Err::DimensionMismatch, sys.name + ": wrong state dimension");
    if (sys.compiled) return jac_compiled(*sys.compiled, x);
    if (sys.model->jac) return sys.model->jac(t, x, sys.param_vector());
    return jacobian_fd(sys, x, t);
}

double divergence_at(const SystemDef& sys, const Vec& x, double t) {
    if (sys.model->div && !sys.compiled) return sys.model->div(t, x, sys.param_vector());
    return jacobian_at(sys, x, t).trace();
}

Vec dfdp_at(const SystemDef& sys, const Vec& x, int k, double t) {
    if (sys.model->dfdp) return sys.model->dfdp(t, x, sys.param_vector(), k);
    double v = sys.params[k].value;
    double h = std::max(1e-6, 1e-6 * std::abs(v));
    SystemDef sp = with_param(sys, sys.params[k].name, v + h);
    SystemDef sm = with_param(sys, sys.params[k].name, v - h);
    return (evaluate_raw(sp, x, t) - evaluate_raw(sm, x, t)) / (2 * h);
}

Vec reduce_periodic(const SystemDef& sys, Vec x) {
    for (const auto& [i, per] : sys.periodic_coords) x[i] = pos_mod(x[i], per);
    return x;
}

Vec state_difference(const SystemDef& sys, const Vec& a, const Vec& b) {
    Vec d = a - b;
    for (const auto& [i, per] : sys.periodic_coords) {
        double r = pos_mod(d[i], per);
        d[i] = r > 0.5 * per ? r - per : r;
    }
    return d;
}

double state_distance(const SystemDef& sys, const Vec& a, const Vec& b) {
    return state_difference(sys, a, b).norm();
}

std::optional<std::vector<Rational>> rational_params(const SystemDef& sys) {
    std::vector<Rational> q;
    for (const auto& p : sys.params) {
        if (!std::isfinite(p.value)) return std::nullopt;
        q.push_back(rationalize(p.value));
    }
    return q;
}

std::optional<TaylorMap<Rational>> exact_polynomial(const SystemDef& sys) {
    if (!sys.is_polynomial()) return std::nullopt;
    auto q = rational_params(sys);
    if (!q) return std::nullopt;
    return sys.model->poly(*q);
}

std::optional<TaylorMap<Rational>> exact_divergence(const SystemDef& sys) {
    auto f = exact_polynomial(sys);
    if (!f || sys.kind != Kind::Flow) return std::nullopt;
    auto comps = f->components();
    PolyS<Rational> div;
    for (int i = 0; i < sys.dim; ++i) poly_axpy(div, Rational(1), poly_diff(comps[i], i));
    return TaylorMap<Rational>::from_components(sys.dim, {div});
}

SystemDef custom_system(const std::string& name, Kind kind, int dim, std::function<Vec(const Vec&)> f,
                        std::function<Mat(const Vec&)> jac) {
    auto m = std::make_shared<Model>();
    m->f = [f](double, const Vec& x, const Vec&) { return f(x); };
    if (jac) m->jac = [jac](double, const Vec& x, const Vec&) { return jac(x); };
    return make(name, kind, dim, {}, m);
}

SystemDef polynomial_system(const std::string& name, Kind kind, int dim, std::vector<ParamSpec> params,
                            std::function<TaylorMap<Rational>(const std::vector<Rational>&)> builder) {
    auto m = std::make_shared<Model>();
    m->poly = builder;
    SystemDef s = make(name, kind, dim, std::move(params), m);
    refresh(s);
    return s;
}

SystemDef polynomial_system(const std::string& name, Kind kind, const TaylorMap<Rational>& f) {
    return polynomial_system(name, kind, f.in_dim, {}, [f](const std::vector<Rational>&) { return f; });
}

SystemDef linear_system(const Mat& A) {
    auto m = std::make_shared<Model>();
    m->f = [A](double, const Vec& x, const Vec&) { return Vec(A * x); };
    m->jac = [A](double, const Vec&, const Vec&) { return A; };
    m->div = [A](double, const Vec&, const Vec&) { return A.trace(); };
    m->poly = [A](const std::vector<Rational>&) {
        TaylorMap<Rational> f(static_cast<int>(A.cols()), static_cast<int>(A.rows()));
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < A.cols(); ++j) {
                MultiIndex a(A.cols(), 0);
                a[j] = 1;
                f.add(a, i, rationalize(A(i, j)));
            }
        return f;
    };
    return make("linear", Kind::Flow, static_cast<int>(A.rows()), {}, m);
}

SystemDef model_system(const std::string& name, Kind kind, int dim, std::vector<ParamSpec> params,
                       std::shared_ptr<Model> model) {
    SystemDef s = make(name, kind, dim, std::move(params), std::move(model));
    refresh(s);
    return s;
}

const char* conservativity_name(Conservativity c) {
    switch (c) {
    case Conservativity::Conservative: return "conservative";
    case Conservativity::Dissipative: return "dissipative";
    case Conservativity::Neither: return "neither";
    }
    return "neither";
}

ConservativityReport conservativity_report(const SystemDef& sys, const std::vector<Vec>& samples, double tol) {
    ConservativityReport rep;
    bool cons = true, diss = true;
    for (const auto& x : samples) {
        double w;
        if (sys.kind == Kind::Flow) {
            w = divergence_at(sys, x);
            cons = cons && std::abs(w) <= tol;
            diss = diss && w < -tol;
        } else {
            w = std::abs(jacobian_at(sys, x).determinant());
            cons = cons && std::abs(w - 1) <= tol;
            diss = diss && w < 1 - tol;
        }
        rep.witnesses.push_back(w);
    }
    rep.verdict = cons ? Conservativity::Conservative : diss ? Conservativity::Dissipative : Conservativity::Neither;
    return rep;
}

}  // namespace dynkit
