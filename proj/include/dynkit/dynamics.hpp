#pragma once

#include "dynkit/systems.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dynkit {

enum class Method { RK4Fixed, RK45Adaptive };

struct FlowOptions {
    Method method = Method::RK45Adaptive;
    double dt = 1e-2;  // fixed step, or first trial step for the adaptive method
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
    long max_steps = 50'000'000;
};

void validate(const FlowOptions& opts);

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
};

struct VariationalResult {
    Vec x_final;
    Mat U;
    double logdetU = 0.0;
    // Maps only: the product of Jacobians is exp(log_scale) * U. Long products
    // are renormalized so U stays finite.
    double log_scale = 0.0;
};

// Raw ODE right-hand side y' = F(t, y), used for combined (state + tangent)
// systems as well as plain flows.
using OdeRhs = std::function<Vec(double, const Vec&)>;

struct OdeProblem {
    OdeRhs rhs;
    // Non-autonomous fields with jumps: steps land on t = (k + phase) * period.
    double break_period = 0.0;
    std::vector<double> break_phases;
    // Only the first `norm_dims` components are watched for blow-up (0: all).
    int norm_dims = 0;
};

// Observer gets every accepted step; returning false stops the integration.
using StepObserver = std::function<bool(double t_prev, const Vec& y_prev, double t, const Vec& y)>;

struct OdeResult {
    double t = 0.0;
    Vec y;
    long steps = 0;
    bool stopped = false;
};

OdeResult integrate(const OdeProblem& prob, double t0, const Vec& y0, double t1, const FlowOptions& opts,
                    const StepObserver& obs = {});

OdeProblem flow_problem(const SystemDef& sys);

Vec flow_to(const SystemDef& sys, const Vec& x0, double t, const FlowOptions& opts = {}, double t0 = 0.0);

// Flows: samples at t = 0, dt, 2dt, ..., t_end. Maps: every `every`-th iterate.
Trajectory trajectory(const SystemDef& sys, const Vec& x0, double t_end, double sample_every,
                      const FlowOptions& opts = {});
Trajectory iterate_map(const SystemDef& sys, const Vec& x0, long n_iter, long sample_every = 1);

// Flows: t is time. Maps: t is rounded to the number of iterates.
VariationalResult variational_flow(const SystemDef& sys, const Vec& x0, double t, const FlowOptions& opts = {},
                                   double t0 = 0.0);
VariationalResult variational_map(const SystemDef& sys, const Vec& x0, long n);

enum class OmegaVerdict { FixedPoint, PeriodicLike, TorusLike, Irregular };
const char* omega_verdict_name(OmegaVerdict v);

struct OmegaProbe {
    std::vector<Vec> cloud;
    OmegaVerdict verdict = OmegaVerdict::Irregular;
    double diameter = 0.0;
    double return_distance = 0.0;  // best near-return distance
    double period = 0.0;           // time between consistent returns, when found
    std::string note;              // states that the verdict is a heuristic
};

OmegaProbe omega_limit_probe(const SystemDef& sys, const Vec& x0, double t_transient, double t_sample,
                             const FlowOptions& opts = {});

std::string trajectory_csv(const SystemDef& sys, const Trajectory& tr);

}  // namespace dynkit
