#pragma once

#include "dynkit/dynamics.hpp"

#include <string>
#include <vector>

namespace dynkit {

enum class CrossDir { Positive, Negative, Both };
const char* cross_dir_name(CrossDir d);
CrossDir parse_cross_dir(const std::string& s);

struct SectionDef {
    Vec anchor;
    Vec normal;  // normalized by make_section
    CrossDir direction = CrossDir::Positive;
    double t_min_return = 1e-3;
    double t_max_return = 1e3;
};

SectionDef make_section(const Vec& anchor, const Vec& normal, CrossDir dir = CrossDir::Positive,
                        double t_min = 1e-3, double t_max = 1e3);
double section_value(const SystemDef& sys, const SectionDef& sec, const Vec& x);

struct PoincareResult {
    Vec image;
    double tau = 0.0;
};

// First return to the section; the crossing time is refined to 1e-10.
PoincareResult poincare_map(const SystemDef& sys, const SectionDef& sec, const Vec& x, const FlowOptions& opts = {},
                            double t0 = 0.0);

struct PeriodicOrbit {
    Vec x0;
    double T = 0.0;
    double residual = 0.0;  // |phi_T(x0) - x0|
    int iterations = 0;
};

// Newton on (phi_T(x) - x, <f(x_guess), x - x_guess>) for autonomous flows.
PeriodicOrbit find_periodic_orbit(const SystemDef& sys, const Vec& x_guess, double T_guess,
                                  const FlowOptions& opts = {}, double tol = 1e-9);

struct MonodromyResult {
    Mat U_T;
    std::vector<cplx> multipliers;
    std::vector<cplx> exponents;  // principal log(mu) / T
    double trivial_residual = 0.0;
};

MonodromyResult monodromy_from(const Mat& U, double T);
MonodromyResult monodromy(const SystemDef& sys, const Vec& x0, double T, const FlowOptions& opts = {});

// Hill equation x'' + w(t)^2 x = 0 with w = Omega on the first half period
// and 1 on the second.
MonodromyResult hill_monodromy(double T, double Omega);
// Same matrix by integrating the variational equation of the builtin system.
Mat hill_monodromy_numeric(double T, double Omega, const FlowOptions& opts = {});

struct HillGridPoint {
    double T = 0.0, Omega = 0.0;
    double max_entry_diff = 0.0;
    double det_error = 0.0;  // |det M - 1| of the closed form
};

std::vector<HillGridPoint> hill_grid(const std::vector<double>& Ts, const std::vector<double>& Omegas,
                                     const FlowOptions& opts = {});
std::vector<HillGridPoint> hill_grid_serial(const std::vector<double>& Ts, const std::vector<double>& Omegas,
                                            const FlowOptions& opts = {});

// Omega,trace,exp_re_1,exp_im_1,exp_re_2,exp_im_2
std::string hill_chart_csv(double T, const std::vector<double>& Omegas);

struct CascadeResult {
    std::vector<double> lambdas;       // lambda_n, n = 1, 2, ...
    std::vector<double> deltas;        // deltas[i] belongs to n = i + 2
    std::vector<double> superstable;   // Lambda_m, m = 0, 1, ...
    double accumulation_estimate = 0.0;
};

struct CascadeOptions {
    double lambda_lo = 0.0, lambda_hi = 4.0;
    double x_lo = 0.0, x_hi = 1.0;  // interval holding the critical point
    double width = 1e-10;
};

// One-dimensional map family: lambda_n is where the 2^(n-1)-cycle multiplier
// crosses -1.
CascadeResult period_doubling_cascade(const SystemDef& sys, const std::string& param, int n_max,
                                      const CascadeOptions& opts = {});
CascadeResult period_doubling_cascade_serial(const SystemDef& sys, const std::string& param, int n_max,
                                             const CascadeOptions& opts = {});

// n,lambda_n,delta_n
std::string cascade_csv(const CascadeResult& r);

struct FlipCoefficients {
    double c01 = 0.0, c11 = 0.0, c20 = 0.0, c30 = 0.0;
    double transversality = 0.0;  // c11 + c20 c01
    double cubic = 0.0;           // c30 + c20^2
    bool transversal = false;
    bool nondegenerate = false;
    double schwarzian = 0.0;
    bool supercritical = false;  // stable period-2 orbit created
    // u^2 of the period-2 orbit per unit of lambda - lambda_c
    double period2_slope = 0.0;
};

FlipCoefficients flip_coefficients(const SystemDef& sys, const std::string& param, double x_star, double lambda_c,
                                   double tol = 1e-8);

}  // namespace dynkit
