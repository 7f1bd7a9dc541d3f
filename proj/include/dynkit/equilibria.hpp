#pragma once

#include "dynkit/systems.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace dynkit {

enum class Stability { AsymptoticallyStable, Unstable, Inconclusive };
const char* stability_name(Stability s);

struct LinearClass {
    int n_plus = 0, n_zero = 0, n_minus = 0;
    // sink, source, hyperbolic, elliptic or nonhyperbolic
    std::string label;
    // 2D flows with det A != 0: node, saddle, focus, center, degenerate node,
    // improper node. Empty otherwise.
    std::string planar;
};

// Flows split by sign of Re, maps by |b| against 1. The matrix, when given,
// decides geometric multiplicity for a repeated planar eigenvalue.
LinearClass classify_linear(const std::vector<cplx>& eigs, Kind kind, double zero_tol = 1e-8,
                            const Mat* A = nullptr);

struct EquilibriumReport {
    Vec point;
    std::vector<cplx> eigenvalues;
    LinearClass cls;
    Stability stability = Stability::Inconclusive;
    double residual = 0.0;
};

struct StabilityVerdict {
    Stability stability;
    std::string reason;
};

StabilityVerdict stability_verdict(const EquilibriumReport& rep);

// Linearization at x (J for flows, DF for maps) classified and judged.
EquilibriumReport analyze_point(const SystemDef& sys, const Vec& x, double zero_tol = 1e-8);

std::vector<EquilibriumReport> find_equilibria(const SystemDef& sys, const std::vector<Vec>& seeds,
                                               double tol = 1e-10, std::vector<std::string>* notes = nullptr);
// Same result computed seed by seed on one thread.
std::vector<EquilibriumReport> find_equilibria_serial(const SystemDef& sys, const std::vector<Vec>& seeds,
                                                      double tol = 1e-10,
                                                      std::vector<std::string>* notes = nullptr);

// Damped Newton on f(x) = 0 (flows) or F(x) - x = 0 (maps) from one seed.
Vec newton_equilibrium(const SystemDef& sys, const Vec& seed, double tol = 1e-10);

// Regular grid of seeds over a box, n points per axis.
std::vector<Vec> seed_grid(const Vec& lo, const Vec& hi, int n);

struct LiapunovCertificate {
    Mat Q;
    double residual = 0.0;
    double min_eigenvalue = 0.0;
};

// Solves A^T Q + Q A = -I for Hurwitz A.
LiapunovCertificate liapunov_certificate(const Mat& A);

nlohmann::json report_json(const EquilibriumReport& rep);

}  // namespace dynkit
