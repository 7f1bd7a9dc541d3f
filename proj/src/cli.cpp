#include "dynkit/cli.hpp"

#include "dynkit/bifurcation.hpp"
#include "dynkit/chaos.hpp"
#include "dynkit/equilibria.hpp"
#include "dynkit/io.hpp"
#include "dynkit/manifolds.hpp"
#include "dynkit/normalform.hpp"
#include "dynkit/periodic.hpp"
#include "dynkit/symbolic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace dynkit {

namespace {

using json = nlohmann::json;

enum class OT { Number, Integer, String, Bool, Vector, Range };
enum class Check { None, Positive, NonNegative, Fraction };

struct OptSpec {
    std::string key;
    OT type;
    json def;  // null: absent unless given
    Check check = Check::None;
    std::vector<std::string> choices;
    bool required = false;
    std::string help;
};

OptSpec num(std::string key, json def, Check c, std::string help) {
    return {std::move(key), OT::Number, std::move(def), c, {}, false, std::move(help)};
}
OptSpec integer(std::string key, json def, Check c, std::string help) {
    return {std::move(key), OT::Integer, std::move(def), c, {}, false, std::move(help)};
}
OptSpec str(std::string key, json def, std::vector<std::string> choices, std::string help) {
    return {std::move(key), OT::String, std::move(def), Check::None, std::move(choices), false, std::move(help)};
}
OptSpec vec(std::string key, std::string help) {
    return {std::move(key), OT::Vector, nullptr, Check::None, {}, false, std::move(help)};
}
OptSpec required(OptSpec o) {
    o.required = true;
    return o;
}

enum class SystemUse { Required, None };

struct CommandSpec {
    std::string name;
    std::string help;
    SystemUse system;
    std::vector<std::string> formats;  // first is the default
    std::vector<OptSpec> opts;
};

std::vector<OptSpec> with_flow(std::vector<OptSpec> v) {
    v.push_back(str("method", "rk45", {"rk45", "rk4"}, "integrator: adaptive rk45 or fixed-step rk4"));
    v.push_back(num("dt", 1e-2, Check::Positive, "rk4 step, or first trial step of rk45"));
    v.push_back(num("abs_tol", 1e-9, Check::Positive, "rk45 absolute tolerance"));
    v.push_back(num("rel_tol", 1e-9, Check::Positive, "rk45 relative tolerance"));
    return v;
}

const std::vector<CommandSpec>& commands() {
    static const std::vector<CommandSpec> specs = {
        {"simulate", "trajectory of a flow or map", SystemUse::Required, {"csv"},
         with_flow({vec("x0", "initial state"), num("t_end", 50.0, Check::Positive, "flow horizon"),
                    num("sample_every", 1e-2, Check::Positive, "flow sampling interval"),
                    integer("n_iter", 1000, Check::Positive, "map iterates"),
                    integer("every", 1, Check::Positive, "keep every k-th map iterate")})},
        {"equilibria", "equilibria from a seed grid, classified", SystemUse::Required, {"json"},
         {vec("lo", "seed box lower corner (default -5)"), vec("hi", "seed box upper corner (default 5)"),
          integer("n", 5, Check::Positive, "seeds per axis"), num("tol", 1e-10, Check::Positive, "Newton tolerance")}},
        {"lyapunov", "Liapunov spectrum", SystemUse::Required, {"json", "csv"},
         with_flow({vec("x0", "initial state"), num("transient", 0.0, Check::NonNegative, "time or iterates dropped first"),
                    num("T", 1000.0, Check::Positive, "flow horizon"), integer("N", 100000, Check::Positive, "map iterates"),
                    num("renorm_interval", 1.0, Check::Positive, "time between QR steps"),
                    num("discard_fraction", 0.1, Check::Fraction, "share of early renormalizations dropped")})},
        {"bifurcate", "equilibrium branch continuation and bifurcation events", SystemUse::Required, {"json"},
         {str("param", nullptr, {}, "continuation parameter (default: the first one)"),
          vec("x0", "equilibrium guess at lambda_start"),
          num("lambda_start", nullptr, Check::None, "start value (default: the current value)"),
          required(num("lambda_end", nullptr, Check::None, "end value")),
          num("step", 0.01, Check::Positive, "parameter step"),
          integer("max_points", 20000, Check::Positive, "point budget"),
          num("tol", 1e-10, Check::Positive, "corrector tolerance")}},
        {"diagram", "bifurcation diagram of a map", SystemUse::Required, {"csv"},
         {str("param", nullptr, {}, "swept parameter (default: the first one)"),
          required({"range", OT::Range, nullptr, Check::None, {}, false, "parameter range lo:hi"}),
          integer("samples", 1000, Check::Positive, "parameter values"),
          integer("transient", 1000, Check::NonNegative, "iterates dropped"),
          integer("keep", 100, Check::Positive, "iterates kept"), vec("x0", "initial state (default 0.5)")}},
        {"cascade", "period-doubling cascade and Feigenbaum ratios", SystemUse::Required, {"csv", "json"},
         {str("param", "lambda", {}, "family parameter"), integer("max_n", 6, Check::Positive, "doublings located"),
          num("lambda_lo", 0.0, Check::None, "parameter search interval"),
          num("lambda_hi", 4.0, Check::None, "parameter search interval"),
          num("x_lo", 0.0, Check::None, "interval holding the critical point"),
          num("x_hi", 1.0, Check::None, "interval holding the critical point"),
          num("width", 1e-10, Check::Positive, "bisection width")}},
        {"poincare", "successive returns to a hyperplane section", SystemUse::Required, {"csv"},
         with_flow({vec("x0", "initial state"), vec("anchor", "point on the section (default 0)"),
                    required(vec("normal", "section normal")),
                    str("direction", "positive", {"positive", "negative", "both"}, "crossing direction"),
                    integer("returns", 10, Check::Positive, "number of returns"),
                    num("t_min", 1e-3, Check::Positive, "shortest return time"),
                    num("t_max", 1e3, Check::Positive, "longest return time")})},
        {"floquet", "periodic orbit, monodromy matrix and multipliers", SystemUse::Required, {"json"},
         with_flow({vec("x0", "point on or near the orbit"), required(num("T", nullptr, Check::Positive, "period")),
                    {"refine", OT::Bool, true, Check::None, {}, false, "Newton-refine the orbit first"},
                    num("tol", 1e-9, Check::Positive, "refinement tolerance")})},
        {"hill-chart", "Hill equation stability chart along Omega", SystemUse::None, {"csv"},
         {num("T", std::numbers::pi, Check::Positive, "period"),
          {"omega_range", OT::Range, json::array({0.05, 4.0}), Check::None, {}, false, "Omega range lo:hi"},
          integer("samples", 401, Check::Positive, "Omega values")}},
        {"manifold", "Taylor graph of a local invariant manifold", SystemUse::Required, {"json"},
         {vec("x0", "equilibrium guess (default 0)"),
          str("which", "center", {"stable", "center", "unstable"}, "manifold"),
          integer("order", 3, Check::Positive, "Taylor order"),
          num("radius", 1e-2, Check::Positive, "sample radius of the invariance residual"),
          integer("samples", 16, Check::Positive, "residual samples")}},
        {"normalform", "resonances and resonant terms at an equilibrium", SystemUse::Required, {"json"},
         {vec("x0", "equilibrium guess (default 0)"), integer("order", 3, Check::Positive, "highest degree"),
          num("tol", 1e-8, Check::Positive, "resonance tolerance")}},
        {"dimension", "box-counting dimension", SystemUse::None, {"json"},
         {str("source", "cantor", {"cantor", "henon", "file"}, "point cloud"),
          integer("depth", 10, Check::Positive, "Cantor construction depth"),
          integer("N", 100000, Check::Positive, "Henon points"),
          str("input", nullptr, {}, "CSV point cloud with a header row (source file)"),
          num("base", 3.0, Check::Positive, "eps = base^-k"), integer("k_lo", 2, Check::NonNegative, "first k"),
          integer("k_hi", 7, Check::NonNegative, "last k")}},
        {"symbolic", "tent itineraries, periodic points, Cantor membership, horseshoe", SystemUse::None, {"json"},
         {str("mode", "itinerary", {"itinerary", "periodic", "cantor", "horseshoe"}, "query"),
          str("x", "1/3", {}, "rational point p/q or decimal"), integer("n", 20, Check::Positive, "itinerary length"),
          integer("p", 3, Check::Positive, "period"), integer("depth", 30, Check::Positive, "ternary digits"),
          str("word", ",+", {}, "horseshoe word over +/- with the origin comma"),
          str("lambda", "1/3", {}, "horseshoe contraction"), str("mu", "5/2", {}, "horseshoe expansion")}},
        {"attractor", "Lorenz trajectory or Henon point cloud", SystemUse::Required, {"csv", "json"},
         with_flow({vec("x0", "initial state"), num("t_end", 100.0, Check::Positive, "Lorenz horizon"),
                    num("sample_every", 1e-2, Check::Positive, "Lorenz sampling interval"),
                    num("transient", nullptr, Check::NonNegative, "dropped time or iterates (0; Henon 1000)"),
                    integer("N", 10000, Check::Positive, "Henon points")})},
    };
    return specs;
}

const CommandSpec* find_command(const std::string& name) {
    for (const auto& c : commands())
        if (c.name == name) return &c;
    return nullptr;
}

std::string pointer_escape(const std::string& key) {
    std::string out;
    for (char ch : key) {
        if (ch == '~') out += "~0";
        else if (ch == '/') out += "~1";
        else out += ch;
    }
    return out;
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

// Normalized value, or an issue.
std::optional<json> check_option(const OptSpec& s, const json& v, const std::string& path,
                                 std::vector<SchemaIssue>& issues) {
    auto bad = [&](const std::string& msg) -> std::optional<json> {
        issues.push_back({path, msg});
        return std::nullopt;
    };
    json out;
    switch (s.type) {
    case OT::Number:
        if (!v.is_number()) return bad("expected a number");
        out = v.get<double>();
        if (!std::isfinite(out.get<double>())) return bad("expected a finite number");
        break;
    case OT::Integer:
        if (v.is_number_integer()) out = v.get<long long>();
        else if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() &&
                 std::abs(v.get<double>()) < 9e15)
            out = static_cast<long long>(v.get<double>());
        else return bad("expected an integer");
        break;
    case OT::String:
        if (!v.is_string()) return bad("expected a string");
        if (!s.choices.empty() && std::find(s.choices.begin(), s.choices.end(), v.get<std::string>()) == s.choices.end())
            return bad("must be one of " + join(s.choices, ", "));
        return v;
    case OT::Bool:
        if (!v.is_boolean()) return bad("expected true or false");
        return v;
    case OT::Vector:
        if (!v.is_array() || v.empty()) return bad("expected a non-empty array of numbers");
        out = json::array();
        for (size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>()))
                return bad("entry " + std::to_string(i) + " is not a finite number");
            out.push_back(v[i].get<double>());
        }
        return out;
    case OT::Range:
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            return bad("expected [lo, hi]");
        if (!(v[0].get<double>() < v[1].get<double>())) return bad("needs lo < hi");
        return json::array({v[0].get<double>(), v[1].get<double>()});
    }
    const double x = out.get<double>();
    if (s.check == Check::Positive && !(x > 0)) return bad("must be positive");
    if (s.check == Check::NonNegative && !(x >= 0)) return bad("must be non-negative");
    if (s.check == Check::Fraction && !(x >= 0 && x < 1)) return bad("must lie in [0, 1)");
    return out;
}

struct Checked {
    RunConfig cfg;
    std::vector<SchemaIssue> issues;
};

Checked check_impl(const json& j) {
    Checked r;
    auto& issues = r.issues;
    RunConfig& cfg = r.cfg;
    if (!j.is_object()) {
        issues.push_back({"", "config must be a JSON object"});
        return r;
    }
    for (const auto& [k, v] : j.items())
        if (k != "command" && k != "system" && k != "options" && k != "output" && k != "seed")
            issues.push_back({"/" + pointer_escape(k), "unknown key"});

    const CommandSpec* spec = nullptr;
    if (!j.contains("command")) {
        issues.push_back({"/command", "required"});
    } else if (!j["command"].is_string() || !(spec = find_command(j["command"].get<std::string>()))) {
        issues.push_back({"/command", "must be one of " + join(cli_commands(), ", ")});
    } else {
        cfg.command = spec->name;
    }

    if (j.contains("system")) {
        const json& s = j["system"];
        if (!s.is_object()) {
            issues.push_back({"/system", "expected an object"});
        } else {
            for (const auto& [k, v] : s.items())
                if (k != "name" && k != "params") issues.push_back({"/system/" + pointer_escape(k), "unknown key"});
            auto names = builtin_names();
            if (!s.contains("name")) {
                issues.push_back({"/system/name", "required"});
            } else if (!s["name"].is_string() ||
                       std::find(names.begin(), names.end(), s["name"].get<std::string>()) == names.end()) {
                issues.push_back({"/system/name", "unknown system; expected one of " + join(names, ", ")});
            } else {
                cfg.system = s["name"].get<std::string>();
            }
            if (s.contains("params")) {
                if (!s["params"].is_object()) {
                    issues.push_back({"/system/params", "expected an object"});
                } else {
                    for (const auto& [k, v] : s["params"].items()) {
                        if (!v.is_number() || !std::isfinite(v.get<double>()))
                            issues.push_back({"/system/params/" + pointer_escape(k), "expected a finite number"});
                        else cfg.params[k] = v.get<double>();
                    }
                }
            }
            if (!cfg.system.empty()) {
                if (cfg.system == "linear") {
                    try {
                        build_builtin(cfg.system, cfg.params);
                    } catch (const Error& e) {
                        issues.push_back({"/system/params", e.what()});
                    }
                } else {
                    SystemDef base = build_builtin(cfg.system);
                    for (const auto& [k, v] : cfg.params) {
                        try {
                            with_param(base, k, v);
                        } catch (const Error& e) {
                            issues.push_back({"/system/params/" + pointer_escape(k), e.what()});
                        }
                    }
                }
            }
        }
    } else if (spec && spec->system == SystemUse::Required) {
        issues.push_back({"/system", "required by " + spec->name});
    }

    if (j.contains("options") && !j["options"].is_object()) {
        issues.push_back({"/options", "expected an object"});
    } else if (spec) {
        const json opts = j.value("options", json::object());
        for (const auto& [k, v] : opts.items()) {
            bool known = std::any_of(spec->opts.begin(), spec->opts.end(), [&](const OptSpec& o) { return o.key == k; });
            if (!known) issues.push_back({"/options/" + pointer_escape(k), "unknown key for " + spec->name});
        }
        for (const auto& o : spec->opts) {
            const std::string path = "/options/" + pointer_escape(o.key);
            if (opts.contains(o.key) && !opts[o.key].is_null()) {
                if (auto v = check_option(o, opts[o.key], path, issues)) cfg.options[o.key] = *v;
            } else if (o.required) {
                issues.push_back({path, "required"});
            } else if (!o.def.is_null()) {
                cfg.options[o.key] = o.def;
            }
        }
    }

    if (j.contains("output")) {
        const json& o = j["output"];
        if (!o.is_object()) {
            issues.push_back({"/output", "expected an object"});
        } else {
            for (const auto& [k, v] : o.items())
                if (k != "path" && k != "format") issues.push_back({"/output/" + pointer_escape(k), "unknown key"});
            if (o.contains("path")) {
                if (!o["path"].is_string()) issues.push_back({"/output/path", "expected a string"});
                else cfg.output_path = o["path"].get<std::string>();
            }
            if (o.contains("format")) {
                if (!o["format"].is_string()) issues.push_back({"/output/format", "expected a string"});
                else cfg.format = o["format"].get<std::string>();
            }
        }
    }
    if (spec) {
        if (cfg.format.empty()) cfg.format = spec->formats.front();
        else if (std::find(spec->formats.begin(), spec->formats.end(), cfg.format) == spec->formats.end())
            issues.push_back({"/output/format", spec->name + " writes " + join(spec->formats, " or ")});
    }

    if (j.contains("seed")) {
        const json& s = j["seed"];
        if (!s.is_number_integer() || s.get<long long>() < 0) issues.push_back({"/seed", "expected a non-negative integer"});
        else cfg.seed = static_cast<long>(s.get<long long>());
    }
    return r;
}

// ---- execution helpers

Vec to_vec(const json& a) {
    Vec v(static_cast<Eigen::Index>(a.size()));
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json cplx_json(const std::vector<cplx>& zs) {
    json a = json::array();
    for (cplx z : zs) a.push_back({{"re", z.real()}, {"im", z.imag()}});
    return a;
}

json mat_json(const Mat& M) {
    json a = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        a.push_back(row);
    }
    return a;
}

Vec default_state(const SystemDef& s) {
    static const std::map<std::string, std::vector<double>> table = {
        {"standard_map", {1.0, 0.5}}, {"lorenz", {1, 1, 1}},      {"logistic", {0.3}},
        {"tent", {0.1234}},           {"tent3", {0.1234}},        {"henon", {0, 0}},
        {"duffing_forced", {1, 0, 0}}, {"van_der_pol", {2, 0}},   {"hill", {1, 0}},
        {"pitchfork_demo", {0.5, 0.5}}};
    auto it = table.find(s.name);
    if (it == table.end()) return Vec::Ones(s.dim);
    return Eigen::Map<const Vec>(it->second.data(), static_cast<Eigen::Index>(it->second.size()));
}

struct Ctx {
    const RunConfig& cfg;
    const json& o;
    SystemDef sys;

    bool has(const std::string& k) const { return o.contains(k); }
    double d(const std::string& k) const { return o.at(k).get<double>(); }
    long long i(const std::string& k) const { return o.at(k).get<long long>(); }
    std::string s(const std::string& k) const { return o.at(k).get<std::string>(); }

    Vec state(const std::string& k, const Vec& fallback) const {
        if (!has(k)) return fallback;
        Vec v = to_vec(o.at(k));
        if (v.size() != sys.dim)
            throw Error(Err::DimensionMismatch, k + " has " + std::to_string(v.size()) + " entries, " + sys.name +
                                                    " has dimension " + std::to_string(sys.dim));
        return v;
    }

    FlowOptions flow() const {
        FlowOptions f;
        f.method = s("method") == "rk4" ? Method::RK4Fixed : Method::RK45Adaptive;
        f.dt = d("dt");
        f.abs_tol = d("abs_tol");
        f.rel_tol = d("rel_tol");
        return f;
    }

    std::string param_or_first(const std::string& k) const {
        if (has(k)) return s(k);
        if (sys.params.empty()) throw Error(Err::Usage, sys.name + " has no parameters");
        return sys.params.front().name;
    }
};

std::vector<double> linspace(double a, double b, long n) {
    std::vector<double> v(n);
    for (long k = 0; k < n; ++k) v[k] = n == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
    return v;
}

std::string state_header(const std::string& first, int dim) {
    std::string h = first;
    for (int k = 1; k <= dim; ++k) h += ",x" + std::to_string(k);
    return h + "\n";
}

Rational rational_arg(const std::string& key, const std::string& text) {
    try {
        return parse_rational(text);
    } catch (const Error& e) {
        throw Error(Err::Usage, key + ": " + e.what());
    }
}

struct Artifact {
    std::string content;
    std::vector<std::string> notes;
};

Artifact text(std::string s) { return {std::move(s), {}}; }
Artifact js(const json& j) { return {dump_json(j), {}}; }

Artifact cmd_simulate(const Ctx& c) {
    Vec x0 = c.state("x0", default_state(c.sys));
    Trajectory tr = c.sys.kind == Kind::Flow ? trajectory(c.sys, x0, c.d("t_end"), c.d("sample_every"), c.flow())
                                             : iterate_map(c.sys, x0, c.i("n_iter"), c.i("every"));
    return text(trajectory_csv(c.sys, tr));
}

Artifact cmd_equilibria(const Ctx& c) {
    Vec lo = c.state("lo", Vec::Constant(c.sys.dim, -5.0));
    Vec hi = c.state("hi", Vec::Constant(c.sys.dim, 5.0));
    std::vector<std::string> notes;
    auto reps = find_equilibria(c.sys, seed_grid(lo, hi, static_cast<int>(c.i("n"))), c.d("tol"), &notes);
    json out;
    out["system"] = c.sys.name;
    out["equilibria"] = json::array();
    for (const auto& r : reps) out["equilibria"].push_back(report_json(r));
    out["notes"] = notes;
    return js(out);
}

Artifact cmd_lyapunov(const Ctx& c) {
    Vec x0 = c.state("x0", default_state(c.sys));
    const double tr = c.d("transient");
    if (tr > 0) {
        if (c.sys.kind == Kind::Flow) x0 = flow_to(c.sys, x0, tr, c.flow());
        else x0 = iterate_map(c.sys, x0, std::llround(tr), std::llround(tr)).states.back();
    }
    SpectrumOptions so;
    so.T = c.d("T");
    so.N = c.i("N");
    so.renorm_interval = c.d("renorm_interval");
    so.discard_fraction = c.d("discard_fraction");
    so.flow = c.flow();
    auto r = lyapunov_spectrum(c.sys, x0, so);
    if (c.cfg.format == "json") return js(spectrum_json(r));
    std::string out = "k";
    for (int k = 1; k <= c.sys.dim; ++k) out += ",l" + std::to_string(k);
    out += "\n";
    for (size_t k = 0; k < r.history.size(); ++k) {
        std::vector<double> row{static_cast<double>(k)};
        row.insert(row.end(), r.history[k].begin(), r.history[k].end());
        out += csv_row(row);
    }
    return text(out);
}

Artifact cmd_bifurcate(const Ctx& c) {
    const std::string p = c.param_or_first("param");
    const double l0 = c.has("lambda_start") ? c.d("lambda_start") : c.sys.param(p);
    ContinuationOptions co;
    co.step = c.d("step");
    co.max_points = static_cast<int>(c.i("max_points"));
    co.tol = c.d("tol");
    Vec x = newton_equilibrium(with_param(c.sys, p, l0), c.state("x0", Vec::Zero(c.sys.dim)), co.tol);
    Continuation cont = continue_branch(c.sys, p, x, l0, c.d("lambda_end"), co);
    auto events = detect_bifurcations(c.sys, cont);
    json out;
    out["param"] = p;
    out["branches"] = json::array();
    for (const auto& b : cont.branches) {
        json pts = json::array();
        for (const auto& q : b.points)
            pts.push_back({{"lambda", q.lambda}, {"x", vec_json(q.x)}, {"stability", stability_name(q.stability)}});
        out["branches"].push_back(pts);
    }
    out["folds"] = json::array();
    for (const auto& f : cont.folds) out["folds"].push_back({{"lambda", f.lambda}, {"x", vec_json(f.x)}});
    out["events"] = events_json(events);
    return js(out);
}

Artifact cmd_diagram(const Ctx& c) {
    const std::string p = c.param_or_first("param");
    DiagramOptions d;
    d.transient = c.i("transient");
    d.keep = c.i("keep");
    if (c.has("x0")) d.x0 = c.state("x0", Vec());
    const json& r = c.o.at("range");
    auto dg = bifurcation_diagram(c.sys, p, linspace(r[0].get<double>(), r[1].get<double>(), c.i("samples")), d);
    return {diagram_csv(dg), dg.notes};
}

Artifact cmd_cascade(const Ctx& c) {
    CascadeOptions co;
    co.lambda_lo = c.d("lambda_lo");
    co.lambda_hi = c.d("lambda_hi");
    co.x_lo = c.d("x_lo");
    co.x_hi = c.d("x_hi");
    co.width = c.d("width");
    auto r = period_doubling_cascade(c.sys, c.s("param"), static_cast<int>(c.i("max_n")), co);
    if (c.cfg.format == "csv") return text(cascade_csv(r));
    return js({{"lambdas", r.lambdas},
               {"deltas", r.deltas},
               {"superstable", r.superstable},
               {"accumulation_estimate", r.accumulation_estimate}});
}

Artifact cmd_poincare(const Ctx& c) {
    if (c.sys.kind != Kind::Flow) throw Error(Err::Usage, "poincare needs a flow");
    Vec x = c.state("x0", default_state(c.sys));
    SectionDef sec = make_section(c.state("anchor", Vec::Zero(c.sys.dim)), c.state("normal", Vec()),
                                  parse_cross_dir(c.s("direction")), c.d("t_min"), c.d("t_max"));
    std::string out = state_header("k,t", c.sys.dim);
    double t = 0.0;
    const FlowOptions fo = c.flow();
    for (long long k = 1; k <= c.i("returns"); ++k) {
        auto p = poincare_map(c.sys, sec, x, fo, t);
        t += p.tau;
        x = p.image;
        std::vector<double> row{static_cast<double>(k), t};
        row.insert(row.end(), x.data(), x.data() + x.size());
        out += csv_row(row);
    }
    return text(out);
}

Artifact cmd_floquet(const Ctx& c) {
    if (c.sys.kind != Kind::Flow) throw Error(Err::Usage, "floquet needs a flow");
    Vec x = c.state("x0", default_state(c.sys));
    double T = c.d("T");
    const FlowOptions fo = c.flow();
    json out;
    if (c.o.at("refine").get<bool>() && c.sys.autonomous) {
        auto orb = find_periodic_orbit(c.sys, x, T, fo, c.d("tol"));
        x = orb.x0;
        T = orb.T;
        out["residual"] = orb.residual;
        out["iterations"] = orb.iterations;
    } else {
        out["residual"] = state_distance(c.sys, flow_to(c.sys, x, T, fo), x);
    }
    auto m = monodromy(c.sys, x, T, fo);
    out["x0"] = vec_json(x);
    out["T"] = T;
    out["monodromy"] = mat_json(m.U_T);
    out["multipliers"] = cplx_json(m.multipliers);
    out["exponents"] = cplx_json(m.exponents);
    out["trivial_residual"] = m.trivial_residual;
    return js(out);
}

Artifact cmd_hill_chart(const Ctx& c) {
    const json& r = c.o.at("omega_range");
    return text(hill_chart_csv(c.d("T"), linspace(r[0].get<double>(), r[1].get<double>(), c.i("samples"))));
}

Artifact cmd_manifold(const Ctx& c) {
    Vec eq = newton_equilibrium(c.sys, c.state("x0", Vec::Zero(c.sys.dim)));
    const int order = static_cast<int>(c.i("order"));
    auto g = local_manifold_taylor(c.sys, eq, parse_manifold_kind(c.s("which")), order);
    json out;
    out["equilibrium"] = vec_json(eq);
    out["which"] = manifold_kind_name(g.which);
    out["order"] = order;
    out["exact"] = g.exact();
    out["in_idx"] = g.in_idx;
    out["out_idx"] = g.out_idx;
    out["h"] = taylor_json(g.h);
    if (g.which == ManifoldKind::Center) out["reduced"] = taylor_json(reduced_dynamics(g, order));
    if (!g.out_idx.empty() && !g.in_idx.empty()) {
        out["radius"] = c.d("radius");
        out["invariance_residual"] = verify_invariance(c.sys, g, c.d("radius"), static_cast<int>(c.i("samples")));
    }
    return js(out);
}

Artifact cmd_normalform(const Ctx& c) {
    if (c.sys.kind != Kind::Flow) throw Error(Err::Usage, "normalform works on flows");
    Vec eq = newton_equilibrium(c.sys, c.state("x0", Vec::Zero(c.sys.dim)));
    const int order = static_cast<int>(c.i("order"));
    if (order < 2) throw Error(Err::Usage, "normalform order must be at least 2");
    TaylorMap<double> field;
    auto exact = exact_polynomial(c.sys);
    if (exact && eq.isZero(0.0)) field = to_double_map(*exact).truncated(order);
    else field = taylor_expand_fd(c.sys, eq, order);
    field.terms.erase(MultiIndex(c.sys.dim, 0));
    NormalForm nf = normal_form(field, order, c.d("tol"));
    json out;
    out["equilibrium"] = vec_json(eq);
    out["eigenvalues"] = cplx_json(nf.eigenvalues);
    out["resonances"] = json::array();
    for (int k = 2; k <= order; ++k) {
        json hits = json::array();
        for (const auto& h : resonances(nf.eigenvalues, k, c.d("tol")).hits)
            hits.push_back({{"j", h.j}, {"p", h.p}, {"residual", h.residual}});
        out["resonances"].push_back({{"k", k}, {"hits", hits}});
    }
    out["resonant_terms"] = json::array();
    for (size_t i = 0; i < nf.resonant.size(); ++i) {
        json terms = json::array();
        for (const auto& [a, v] : nf.resonant[i].terms) terms.push_back({{"alpha", a}, {"coeff", cplx_json(v)}});
        out["resonant_terms"].push_back({{"k", static_cast<int>(i) + 2}, {"terms", terms}});
    }
    return js(out);
}

std::vector<Vec> read_point_csv(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);  // header
    std::vector<Vec> pts;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<double> v;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                size_t used = 0;
                v.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw Error(Err::Usage, path + ": row " + std::to_string(row) + " has a non-numeric cell");
            }
        }
        pts.push_back(Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    return pts;
}

Artifact cmd_dimension(const Ctx& c) {
    const std::string src = c.s("source");
    std::vector<Vec> pts;
    if (src == "cantor") {
        for (double x : cantor_endpoints(static_cast<int>(c.i("depth")))) pts.push_back(Vec::Constant(1, x));
    } else if (src == "henon") {
        pts = henon_attractor_experiment(1.4, 0.3, c.i("N"), 1000).points;
    } else {
        if (!c.has("input")) throw Error(Err::Usage, "source file needs options.input");
        pts = read_point_csv(c.s("input"));
    }
    if (c.i("k_hi") < c.i("k_lo")) throw Error(Err::Usage, "k_hi must not be below k_lo");
    auto est = box_dimension(pts, geometric_ladder(c.d("base"), static_cast<int>(c.i("k_lo")), static_cast<int>(c.i("k_hi"))));
    return js({{"source", src},
               {"n_points", pts.size()},
               {"eps", est.eps},
               {"counts", est.counts},
               {"slope", est.slope},
               {"r2", est.r2}});
}

Artifact cmd_symbolic(const Ctx& c) {
    const std::string mode = c.s("mode");
    json out;
    out["mode"] = mode;
    auto unit_point = [&] {
        Rational x = rational_arg("x", c.s("x"));
        if (x < 0 || x > 1) throw Error(Err::Usage, "x must lie in [0, 1]");
        return x;
    };
    if (mode == "itinerary") {
        Rational x = unit_point();
        auto s = tent_itinerary(x, static_cast<int>(c.i("n")));
        out["x"] = rat_str(x);
        out["symbols"] = s.symbols;
        out["word"] = symbols_str(s);
    } else if (mode == "periodic") {
        auto pts = enumerate_periodic_tent(static_cast<int>(c.i("p")));
        out["p"] = c.i("p");
        out["count"] = pts.size();
        out["points"] = json::array();
        for (const auto& q : pts)
            out["points"].push_back({{"word", symbols_str(q.word)}, {"x", rat_str(q.x)}, {"verified", q.verified}});
    } else if (mode == "cantor") {
        Rational x = unit_point();
        auto m = cantor_membership(x, static_cast<int>(c.i("depth")));
        out["x"] = rat_str(x);
        out["verdict"] = m.verdict == CantorVerdict::In ? "in" : "out";
        out["digits"] = m.digits;
        out["exact"] = m.exact;
        out["boundary_resolved"] = m.boundary_resolved;
    } else {
        auto r = horseshoe_rectangle(c.s("word"), rational_arg("lambda", c.s("lambda")), rational_arg("mu", c.s("mu")));
        out["word"] = c.s("word");
        out["x0"] = rat_str(r.x0);
        out["y0"] = rat_str(r.y0);
        out["width"] = rat_str(r.width);
        out["height"] = rat_str(r.height);
    }
    return js(out);
}

Artifact cmd_attractor(const Ctx& c) {
    if (c.sys.name == "lorenz") {
        Vec x0 = c.state("x0", default_state(c.sys));
        const FlowOptions fo = c.flow();
        if (c.has("transient") && c.d("transient") > 0) x0 = flow_to(c.sys, x0, c.d("transient"), fo);
        if (c.cfg.format == "csv") return text(trajectory_csv(c.sys, trajectory(c.sys, x0, c.d("t_end"), c.d("sample_every"), fo)));
        SpectrumOptions so;
        so.T = c.d("t_end");
        so.flow = fo;
        auto r = lyapunov_spectrum(c.sys, x0, so);
        return js({{"system", "lorenz"}, {"spectrum", spectrum_json(r)}, {"x_final", vec_json(r.x_final)}});
    }
    if (c.sys.name == "henon") {
        const long transient = c.has("transient") ? std::llround(c.d("transient")) : 1000;
        auto ex = henon_attractor_experiment(c.sys.param("lambda"), c.sys.param("b"), c.i("N"), transient);
        if (c.cfg.format == "csv") return text(point_cloud_csv(ex.points));
        json out = {{"system", "henon"}, {"n_points", ex.points.size()}, {"box_lo", vec_json(ex.box_lo)},
                    {"box_hi", vec_json(ex.box_hi)}};
        if (!ex.spectrum.exponents.empty()) out["spectrum"] = spectrum_json(ex.spectrum);
        return js(out);
    }
    throw Error(Err::Usage, "attractor runs lorenz or henon, not " + c.sys.name);
}

Artifact execute_full(const RunConfig& cfg) {
    static const std::map<std::string, std::function<Artifact(const Ctx&)>> table = {
        {"simulate", cmd_simulate},   {"equilibria", cmd_equilibria}, {"lyapunov", cmd_lyapunov},
        {"bifurcate", cmd_bifurcate}, {"diagram", cmd_diagram},       {"cascade", cmd_cascade},
        {"poincare", cmd_poincare},   {"floquet", cmd_floquet},       {"hill-chart", cmd_hill_chart},
        {"manifold", cmd_manifold},   {"normalform", cmd_normalform}, {"dimension", cmd_dimension},
        {"symbolic", cmd_symbolic},   {"attractor", cmd_attractor}};
    auto it = table.find(cfg.command);
    if (it == table.end()) throw Error(Err::Usage, "unknown command '" + cfg.command + "'");
    Ctx ctx{cfg, cfg.options, cfg.system.empty() ? SystemDef{} : build_builtin(cfg.system, cfg.params)};
    return it->second(ctx);
}

void dump_rec(const json& j, int indent, std::string& out) {
    const std::string pad(indent + 2, ' ');
    auto scalar = [](const json& v) { return !v.is_object() && !v.is_array(); };
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        size_t k = 0;
        for (const auto& [key, v] : j.items()) {
            out += pad + json(key).dump() + ": ";
            dump_rec(v, indent + 2, out);
            out += ++k < j.size() ? ",\n" : "\n";
        }
        out += std::string(indent, ' ') + "}";
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        if (std::all_of(j.begin(), j.end(), scalar)) {
            out += "[";
            for (size_t k = 0; k < j.size(); ++k) {
                if (k) out += ", ";
                dump_rec(j[k], indent, out);
            }
            out += "]";
            return;
        }
        out += "[\n";
        for (size_t k = 0; k < j.size(); ++k) {
            out += pad;
            dump_rec(j[k], indent + 2, out);
            out += k + 1 < j.size() ? ",\n" : "\n";
        }
        out += std::string(indent, ' ') + "]";
        return;
    }
    case json::value_t::number_float: {
        double x = j.get<double>();
        out += std::isfinite(x) ? fmt_double(x) : "null";
        return;
    }
    default:
        out += j.dump();
    }
}

std::string kebab(std::string s) {
    std::replace(s.begin(), s.end(), '_', '-');
    return s;
}

// Flag text to a JSON value of the option's type.
json parse_flag(const OptSpec& o, const std::string& v) {
    auto number = [&](const std::string& t) {
        size_t used = 0;
        double x = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument("");
        return x;
    };
    switch (o.type) {
    case OT::Number: return number(v);
    case OT::Integer: {
        size_t used = 0;
        long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return x;
    }
    case OT::String: return v;
    case OT::Bool:
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw std::invalid_argument("");
    case OT::Vector: {
        json a = json::array();
        std::istringstream ss(v);
        std::string cell;
        while (std::getline(ss, cell, ',')) a.push_back(number(cell));
        return a;
    }
    case OT::Range: {
        auto colon = v.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("");
        return json::array({number(v.substr(0, colon)), number(v.substr(colon + 1))});
    }
    }
    return nullptr;
}

std::string error_json(const std::string& kind, const std::string& message, int code,
                       const std::vector<SchemaIssue>* issues = nullptr) {
    json e = {{"error", kind}, {"message", message}, {"exit_code", code}};
    if (issues) {
        e["issues"] = json::array();
        for (const auto& i : *issues) e["issues"].push_back({{"path", i.path}, {"message", i.message}});
    }
    return e.dump();
}

struct Flags {
    std::string config, system, output, format, seed;
    std::vector<std::string> params;
    bool dump = false;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> given;
};

}  // namespace

nlohmann::json RunConfig::to_json() const {
    json j;
    j["command"] = command;
    if (!system.empty()) {
        j["system"]["name"] = system;
        j["system"]["params"] = json::object();
        for (const auto& [k, v] : params) j["system"]["params"][k] = v;
    }
    j["options"] = options;
    j["output"]["format"] = format;
    if (!output_path.empty()) j["output"]["path"] = output_path;
    j["seed"] = seed;
    return j;
}

ConfigError::ConfigError(std::vector<SchemaIssue> issues)
    : Error(Err::SchemaViolation,
            [&] {
                std::string m = "invalid config";
                for (const auto& i : issues) m += "; " + (i.path.empty() ? std::string("/") : i.path) + ": " + i.message;
                return m;
            }()),
      issues_(std::move(issues)) {}

std::vector<std::string> cli_commands() {
    std::vector<std::string> v;
    for (const auto& c : commands()) v.push_back(c.name);
    return v;
}

std::vector<SchemaIssue> check_config(const nlohmann::json& j) { return check_impl(j).issues; }

RunConfig validate_config(const nlohmann::json& j) {
    auto r = check_impl(j);
    if (!r.issues.empty()) throw ConfigError(r.issues);
    return r.cfg;
}

RunConfig validate_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::vector<SchemaIssue>{{"", std::string("not valid JSON: ") + e.what()}});
    }
    return validate_config(j);
}

std::string execute(const RunConfig& cfg) { return execute_full(cfg).content; }

std::string dump_json(const nlohmann::json& j) {
    std::string out;
    dump_rec(j, 0, out);
    return out + "\n";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
        CLI::App app{"dynkit: flows, maps, bifurcations and chaos"};
        app.require_subcommand(0, 1);
        Flags top;
        app.add_option("--config", top.config, "JSON run config; its command is used when none is given");
        app.add_option("-o,--output", top.output, "output file (default stdout)");
        app.add_flag("--dump-config", top.dump, "print the validated config and exit");
        std::map<std::string, Flags> per;
        std::map<std::string, CLI::App*> subs;
        for (const auto& spec : commands()) {
            Flags& f = per[spec.name];
            CLI::App* sub = app.add_subcommand(spec.name, spec.help);
            subs[spec.name] = sub;
            sub->add_option("--config", f.config, "JSON run config merged under the flags");
            if (spec.system == SystemUse::Required) {
                sub->add_option("--system", f.system, "builtin system: " + join(builtin_names(), ", "));
                sub->add_option("--set", f.params, "parameter override name=value (repeatable)");
            }
            sub->add_option("-o,--output", f.output, "output file (default stdout)");
            sub->add_option("--format", f.format, "output format: " + join(spec.formats, ", "));
            sub->add_option("--seed", f.seed, "integer seed (default 0)");
            sub->add_flag("--dump-config", f.dump, "print the validated config and exit");
            for (const auto& o : spec.opts) f.values[o.key];
            for (const auto& o : spec.opts)
                f.given[o.key] = sub->add_option("--" + kebab(o.key), f.values[o.key], o.help);
        }
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0) {
                app.exit(e, out, err);
                return 0;
            }
            throw Error(Err::Usage, e.what());
        }

        std::string chosen;
        for (const auto& [name, sub] : subs)
            if (sub->parsed()) chosen = name;
        Flags& f = chosen.empty() ? top : per[chosen];
        if (chosen.empty() && top.config.empty()) {
            out << app.help();
            return 2;
        }

        json j = json::object();
        if (!f.config.empty()) {
            try {
                j = json::parse(read_file(f.config));
            } catch (const json::parse_error& e) {
                throw ConfigError(std::vector<SchemaIssue>{{"", f.config + " is not valid JSON: " + e.what()}});
            }
            if (!j.is_object()) throw ConfigError(std::vector<SchemaIssue>{{"", "config must be a JSON object"}});
        }
        std::vector<SchemaIssue> issues;
        if (!chosen.empty()) {
            j["command"] = chosen;
            const CommandSpec& spec = *find_command(chosen);
            auto ensure = [&](const char* key) {
                if (!j.contains(key) || !j[key].is_object()) j[key] = json::object();
            };
            if (!f.system.empty()) {
                ensure("system");
                j["system"]["name"] = f.system;
            }
            for (const auto& pv : f.params) {
                auto eq = pv.find('=');
                std::string k = pv.substr(0, eq);
                try {
                    if (eq == std::string::npos || k.empty()) throw std::invalid_argument("");
                    size_t used = 0;
                    std::string v = pv.substr(eq + 1);
                    double x = std::stod(v, &used);
                    if (used != v.size()) throw std::invalid_argument("");
                    ensure("system");
                    if (!j["system"].contains("params") || !j["system"]["params"].is_object())
                        j["system"]["params"] = json::object();
                    j["system"]["params"][k] = x;
                } catch (const std::exception&) {
                    issues.push_back({"/system/params" + (k.empty() ? "" : "/" + pointer_escape(k)),
                                      "--set expects name=number, got '" + pv + "'"});
                }
            }
            for (const auto& o : spec.opts) {
                if (f.given[o.key]->count() == 0) continue;
                try {
                    ensure("options");
                    j["options"][o.key] = parse_flag(o, f.values[o.key]);
                } catch (const std::exception&) {
                    issues.push_back({"/options/" + pointer_escape(o.key),
                                      "cannot parse --" + kebab(o.key) + " '" + f.values[o.key] + "'"});
                }
            }
            if (!f.format.empty()) {
                ensure("output");
                j["output"]["format"] = f.format;
            }
            if (!f.seed.empty()) {
                try {
                    size_t used = 0;
                    long long s = std::stoll(f.seed, &used);
                    if (used != f.seed.size()) throw std::invalid_argument("");
                    j["seed"] = s;
                } catch (const std::exception&) {
                    issues.push_back({"/seed", "cannot parse --seed '" + f.seed + "'"});
                }
            }
        }
        if (!f.output.empty()) {
            if (!j.contains("output") || !j["output"].is_object()) j["output"] = json::object();
            j["output"]["path"] = f.output;
        }
        if (!issues.empty()) throw ConfigError(issues);

        RunConfig cfg = validate_config(j);
        if (f.dump) {
            out << dump_json(cfg.to_json());
            return 0;
        }
        Artifact a = execute_full(cfg);
        for (const auto& n : a.notes) err << json{{"note", n}}.dump() << "\n";
        if (cfg.output_path.empty()) out << a.content;
        else write_atomic(cfg.output_path, a.content);
        return 0;
    } catch (const ConfigError& e) {
        err << error_json(err_name(e.kind()), e.what(), 2, &e.issues()) << "\n";
        return 2;
    } catch (const Error& e) {
        int code = is_usage_error(e.kind()) ? 2 : 3;
        err << error_json(err_name(e.kind()), e.what(), code) << "\n";
        return code;
    } catch (const std::exception& e) {
        err << error_json("Internal", e.what(), 3) << "\n";
        return 3;
    }
}

}  // namespace dynkit
