#pragma once

#include "dynkit/dynamics.hpp"
#include "dynkit/rational.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace dynkit {

struct SpectrumOptions {
    double T = 1000.0;              // flows: time horizon
    long N = 100000;                // maps: iterates
    double renorm_interval = 1.0;   // flows: time between QR steps (maps renormalize every iterate)
    double discard_fraction = 0.1;  // share of initial renormalizations dropped
    FlowOptions flow;
};

struct SpectrumResult {
    std::vector<double> exponents;  // descending
    std::vector<std::vector<double>> history;  // running estimate after each kept renormalization
    double sum = 0.0;
    double T_total = 0.0;  // flows
    long N_total = 0;      // maps
    bool unconverged = false;  // last-quarter drift above 5%
    Vec x_final;
};

SpectrumResult lyapunov_spectrum(const SystemDef& sys, const Vec& x0, const SpectrumOptions& opts = {});

nlohmann::json spectrum_json(const SpectrumResult& r);

struct DimensionEstimate {
    std::vector<double> eps;
    // Occupied cells, the least over four grids offset by quarter cells from
    // the bounding-box corner.
    std::vector<long> counts;
    double slope = 0.0;  // least squares on (log 1/eps, log N)
    double r2 = 0.0;
};

// Needs at least 1000 points and a geometric ladder of at least 4 rungs.
DimensionEstimate box_dimension(const std::vector<Vec>& points, const std::vector<double>& eps);
DimensionEstimate box_dimension_serial(const std::vector<Vec>& points, const std::vector<double>& eps);

std::vector<double> geometric_ladder(double base, int k_lo, int k_hi);  // base^-k

struct SensitivityResult {
    bool sensitive = false;
    std::vector<double> divergence_times;  // per probe, negative when not reached
};

// Probes y = x + delta0 u with deterministic unit directions u.
SensitivityResult sensitivity_test(const SystemDef& sys, const Vec& x, double delta0, double eps_target, double T_max,
                                   int n_probes, const FlowOptions& opts = {}, unsigned seed = 0);
SensitivityResult sensitivity_test_serial(const SystemDef& sys, const Vec& x, double delta0, double eps_target,
                                          double T_max, int n_probes, const FlowOptions& opts = {},
                                          unsigned seed = 0);
// Exact iteration for maps with an exact_map (tent maps): returns the first
// n with |F^n(x) - F^n(y)| >= eps_target, or -1.
long divergence_iterates_exact(const SystemDef& sys, const Rational& x, const Rational& y, const Rational& eps_target,
                               long n_max);

struct ErgodicAverage {
    double mean = 0.0;
    double stderr_ = 0.0;  // batch-means standard error
    double reference = 0.0;
    long N = 0;
    bool within_3se() const { return std::abs(mean - reference) <= 3 * stderr_; }
};

// Float iteration of a one-dimensional map.
ErgodicAverage ergodic_average(const SystemDef& sys, double x0, const std::function<double(double)>& phi, long N,
                               double reference);
// The tent map run on numerators over q = 3^38; g2 keeps odd denominators,
// so the orbit neither collapses nor rounds. x0 is floor(x q) / q.
ErgodicAverage tent_ergodic_average(double x0, const std::function<double(double)>& phi, long N, double reference);
// Same with x0 = sqrt(2) - 1 rounded down to the grid exactly.
ErgodicAverage tent_ergodic_average_sqrt2(const std::function<double(double)>& phi, long N, double reference);

struct HenonExperiment {
    std::vector<Vec> points;
    SpectrumResult spectrum;  // empty when b = 0
    Vec box_lo, box_hi;
};

HenonExperiment henon_attractor_experiment(double lambda = 1.4, double b = 0.3, long N = 100000,
                                           long transient = 1000);

std::string point_cloud_csv(const std::vector<Vec>& pts);

// Orbit fates in the Lorenz system for a seed grid: where each orbit settles
// and how often it switches lobes (sign of x1) on the way.
struct LorenzFates {
    double to_cplus = 0.0, to_cminus = 0.0, unsettled = 0.0;  // fractions
    double mean_switches = 0.0;
};

LorenzFates lorenz_orbit_fates(double r, const std::vector<Vec>& seeds, double T, const FlowOptions& opts = {});
LorenzFates lorenz_orbit_fates_serial(double r, const std::vector<Vec>& seeds, double T,
                                      const FlowOptions& opts = {});

// +1 if the x1 > 0 branch of the origin's unstable manifold settles on C+,
// -1 if on C-, 0 if it does not settle by time T.
int lorenz_unstable_branch_fate(double r, double T = 200.0, const FlowOptions& opts = {});

// Bisection on the change of that fate: the homoclinic parameter r1.
double lorenz_homoclinic_estimate(double r_lo, double r_hi, double tol = 1e-3, const FlowOptions& opts = {});

}  // namespace dynkit
