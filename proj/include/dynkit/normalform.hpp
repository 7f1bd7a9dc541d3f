#pragma once

#include "dynkit/dynamics.hpp"
#include "dynkit/manifolds.hpp"

#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace dynkit {

struct ResonanceHit {
    int j = 0;  // component, 0-based
    MultiIndex p;
    double residual = 0.0;  // |p.a - a_j|
};

struct ResonanceReport {
    int k = 0;
    std::vector<ResonanceHit> hits;
};

// |p.a - a_j| <= tol * max(1, max |a_i|) over |p| = k.
ResonanceReport resonances(const std::vector<cplx>& eigs, int k, double tol = 1e-8);
// Exact version for rational spectra: residual is 0 for every hit.
ResonanceReport resonances_exact(const std::vector<Rational>& eigs, int k);

// Matrix of h -> Dh(x) A x - A h on homogeneous degree-k vector polynomials.
// Basis element b * n + j is x^basis[b] e_j with basis = monomials_of_degree(n, k).
struct HomogeneousOperator {
    int k = 0, n = 0;
    std::vector<MultiIndex> basis;
    CMat matrix;
};

HomogeneousOperator adk_operator(const CMat& A, int k);
HomogeneousOperator adk_operator(const Mat& A, int k);
// Exact operator for rational A, same basis order.
RMat adk_operator_exact(const RMat& A, int k);

struct NormalFormStep {
    TaylorMap<cplx> resonant;  // degree-k terms that stay
    TaylorMap<cplx> h;         // change of variables z = w + h(w)
    TaylorMap<cplx> field;     // transformed field up to the same order
};

// Linear part of `field` must be diagonal (see to_eigenbasis).
NormalFormStep normal_form_step(const TaylorMap<cplx>& field, int k, double tol = 1e-8);

struct NormalForm {
    std::vector<cplx> eigenvalues;
    CMat V;  // x = V y
    TaylorMap<cplx> field;
    std::vector<TaylorMap<cplx>> resonant;  // index k - 2
    std::vector<TaylorMap<cplx>> transforms;
};

// y = V^{-1} x with V the eigenvector matrix of the linear part.
std::pair<TaylorMap<cplx>, CMat> to_eigenbasis(const TaylorMap<double>& field);
NormalForm normal_form(const TaylorMap<double>& field, int order, double tol = 1e-8);

// Map homological equation h(mu z, conj(mu) conj(z)) - mu h = g at degree 2 or 3.
struct NeimarkCoeffs {
    std::map<std::pair<int, int>, cplx> h;
    std::vector<std::pair<int, int>> non_removable;
    std::vector<std::pair<int, int>> near_resonant;  // |denominator| < 1e-3
};

NeimarkCoeffs neimark_homological_coeffs(cplx mu, const std::map<std::pair<int, int>, cplx>& c, double tol = 1e-8);

// r' = rho r + alpha r^3, phi' = phi + 2 pi theta + beta r^2 for mu = rho e^{2 pi i theta}.
struct NeimarkPolar {
    double alpha = 0.0, beta = 0.0;
};
NeimarkPolar neimark_polar_coeffs(cplx mu, cplx c);

// First-order conjugacy for the kicked rotation with frequency omega.
struct StandardMapConjugacy {
    double omega = 0.0;
    // Fourier coefficients of e^{+i phi} and e^{-i phi}.
    cplx a1, am1, b1, bm1;
    double f1(double phi) const;
    double g1(double phi) const;
    double f1_fourier(double phi) const;
    double g1_fourier(double phi) const;
};

StandardMapConjugacy standard_map_conjugacy_o1(double omega, double tol = 1e-8);

enum class HopfKind { Supercritical, Subcritical };
const char* hopf_kind_name(HopfKind k);

struct HopfSample {
    double lambda = 0.0;
    bool equilibrium_stable = false;
    bool found = false;
    double amplitude = 0.0;  // max distance of the cycle from the equilibrium
    double period = 0.0;
    bool cycle_stable = false;
};

struct HopfEstimate {
    HopfKind kind = HopfKind::Supercritical;
    double K = 0.0;  // amplitude ~ K sqrt|lambda - lambda_c|
    double r_squared = 0.0;
    std::vector<HopfSample> samples;
};

struct HopfOptions {
    double s_max = 2.0;  // largest initial offset along the rotation plane
    int n_scan = 16;     // offsets s_max * 2^(-k/2)
    FlowOptions flow;
};

// Cycles near a Hopf point are located by periodic-orbit Newton from guesses
// in the plane of the critical eigenvector; x_c is the equilibrium at lambda_c.
HopfEstimate hopf_sign_estimate(const SystemDef& sys, const std::string& param, double lambda_c, const Vec& x_c,
                                const std::vector<double>& probes, const HopfOptions& opts = {});

}  // namespace dynkit
