#pragma once

#include "dynkit/core.hpp"
#include "dynkit/poly.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dynkit {

enum class Kind { Flow, Map };

struct ParamSpec {
    std::string name;
    double value = 0.0;
    std::optional<std::pair<double, double>> range;
};

using ParamTable = std::map<std::string, double>;

// Parametric kernel shared by every SystemDef built from the same family.
// p is the parameter vector in the order of SystemDef::params.
struct Model {
    std::function<Vec(double t, const Vec& x, const Vec& p)> f;
    std::function<Mat(double t, const Vec& x, const Vec& p)> jac;
    std::function<double(double t, const Vec& x, const Vec& p)> div;
    std::function<Vec(double t, const Vec& x, const Vec& p, int k)> dfdp;
    // Polynomial systems: f written exactly as a polynomial in x for given
    // rational parameter values.
    std::function<TaylorMap<Rational>(const std::vector<Rational>& p)> poly;
    // Piecewise-linear maps whose rational orbits keep bounded denominators
    // iterate exactly through this.
    std::function<std::vector<Rational>(const std::vector<Rational>& x)> exact_map;
};

struct CompiledPoly {
    TaylorMap<double> f;
    std::vector<TaylorMap<double>> df;  // df[i] = partial f / partial x_i
};

struct SystemDef {
    std::string name;
    Kind kind = Kind::Flow;
    int dim = 0;
    std::vector<ParamSpec> params;
    std::shared_ptr<const Model> model;
    std::vector<std::pair<int, double>> periodic_coords;
    bool autonomous = true;
    // Non-autonomous fields with jumps at t = (k + phase) * time_period.
    double time_period = 0.0;
    std::vector<double> time_breaks;
    // Index of the parameter that sets time_period, -1 if fixed.
    int period_param = -1;
    // Systems built by polynomial_system evaluate through this compiled form.
    std::shared_ptr<const CompiledPoly> compiled;

    Vec param_vector() const;
    int param_index(const std::string& name) const;
    double param(const std::string& name) const;
    bool has_jacobian() const { return model && static_cast<bool>(model->jac); }
    bool is_polynomial() const { return model && static_cast<bool>(model->poly); }
};

std::vector<std::string> builtin_names();

SystemDef build_builtin(const std::string& name, const ParamTable& overrides = {});

// Fresh value with some parameters replaced.
SystemDef with_params(const SystemDef& sys, const ParamTable& overrides);
SystemDef with_param(const SystemDef& sys, const std::string& name, double value);

Vec evaluate(const SystemDef& sys, const Vec& x, double t = 0.0);
// Evaluator without periodic reduction of the output; integrators and
// finite differences use this one.
Vec evaluate_raw(const SystemDef& sys, const Vec& x, double t = 0.0);
Mat jacobian_at(const SystemDef& sys, const Vec& x, double t = 0.0);
Mat jacobian_fd(const SystemDef& sys, const Vec& x, double t = 0.0);
double divergence_at(const SystemDef& sys, const Vec& x, double t = 0.0);
Vec dfdp_at(const SystemDef& sys, const Vec& x, int k, double t = 0.0);

Vec reduce_periodic(const SystemDef& sys, Vec x);
Vec state_difference(const SystemDef& sys, const Vec& a, const Vec& b);
double state_distance(const SystemDef& sys, const Vec& a, const Vec& b);

std::optional<std::vector<Rational>> rational_params(const SystemDef& sys);
// Exact polynomial form of f with the parameters rationalized.
std::optional<TaylorMap<Rational>> exact_polynomial(const SystemDef& sys);
// Divergence of a polynomial flow as an exact polynomial (out_dim 1).
std::optional<TaylorMap<Rational>> exact_divergence(const SystemDef& sys);

// User systems enter through these constructors.
SystemDef custom_system(const std::string& name, Kind kind, int dim, std::function<Vec(const Vec&)> f,
                        std::function<Mat(const Vec&)> jac = {});
SystemDef polynomial_system(const std::string& name, Kind kind, int dim, std::vector<ParamSpec> params,
                            std::function<TaylorMap<Rational>(const std::vector<Rational>&)> builder);
SystemDef polynomial_system(const std::string& name, Kind kind, const TaylorMap<Rational>& f);
SystemDef linear_system(const Mat& A);
// Wraps an arbitrary model. Models with a poly builder and no f are compiled.
SystemDef model_system(const std::string& name, Kind kind, int dim, std::vector<ParamSpec> params,
                       std::shared_ptr<Model> model);

enum class Conservativity { Conservative, Dissipative, Neither };
const char* conservativity_name(Conservativity c);

struct ConservativityReport {
    Conservativity verdict = Conservativity::Neither;
    // Divergence (flows) or |det DF| (maps) at each sample.
    std::vector<double> witnesses;
};

ConservativityReport conservativity_report(const SystemDef& sys, const std::vector<Vec>& samples,
                                           double tol = 1e-9);

}  // namespace dynkit
