#pragma once

#include "dynkit/ratlinalg.hpp"
#include "dynkit/systems.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace dynkit {

// Polynomial map with double coefficients, plus the exact rational
// coefficients when they were computed exactly.
struct TaylorMapPoly {
    TaylorMap<double> num;
    std::optional<TaylorMap<Rational>> exact;

    TaylorMapPoly() = default;
    explicit TaylorMapPoly(TaylorMap<double> m) : num(std::move(m)) {}
    explicit TaylorMapPoly(const TaylorMap<Rational>& m) : num(to_double_map(m)), exact(m) {}
    int in_dim() const { return num.in_dim; }
    int out_dim() const { return num.out_dim; }
    int degree() const { return num.degree(); }
};

nlohmann::json taylor_json(const TaylorMapPoly& p);
TaylorMapPoly taylor_from_json(const nlohmann::json& j);

// Block coordinates ordered (stable, center, unstable): A T = T diag(B, C, A+).
struct SpectralSplit {
    Mat T, Tinv;
    Mat B, C, Aplus;
    int n_minus = 0, n_zero = 0, n_plus = 0;
    Mat blocks() const;  // T^{-1} A T with off-block entries zeroed
};

SpectralSplit spectral_split(const Mat& A, double zero_tol = 1e-8);

enum class ManifoldKind { Stable, Center, Unstable };
const char* manifold_kind_name(ManifoldKind k);
ManifoldKind parse_manifold_kind(const std::string& s);

// Field in block coordinates w about the equilibrium: w' = G(w), with G
// truncated at some order. linear part is block diagonal.
struct LocalField {
    Vec eq;
    SpectralSplit split;
    std::optional<RMat> T_exact, Tinv_exact;
    TaylorMapPoly G;
};

LocalField local_field(const SystemDef& sys, const Vec& eq, int order, double zero_tol = 1e-6);

// Multivariate Taylor coefficients of f at x0 up to `order` from central
// differences with one Richardson step.
TaylorMap<double> taylor_expand_fd(const SystemDef& sys, const Vec& x0, int order);

struct ManifoldGraph {
    ManifoldKind which = ManifoldKind::Center;
    int order = 0;
    LocalField field;
    std::vector<int> in_idx, out_idx;  // block coordinates of z and of h(z)
    TaylorMapPoly h;
    bool exact() const { return h.exact.has_value(); }
};

ManifoldGraph local_manifold_taylor(const SystemDef& sys, const Vec& eq, ManifoldKind which, int order,
                                    double zero_tol = 1e-6);

// z' = A_in z + g_in(z, h(z)) truncated at `order`.
TaylorMapPoly reduced_dynamics(const ManifoldGraph& g, int order);

// Max over n_samples points with |z| = radius of |F_out - Dh(z) F_in|,
// evaluated with the full vector field.
double verify_invariance(const SystemDef& sys, const ManifoldGraph& g, double radius, int n_samples);

// Appends lambda' = 0 with lambda the named parameter as last coordinate.
SystemDef extend_with_parameter(const SystemDef& sys, const std::string& param);

}  // namespace dynkit
