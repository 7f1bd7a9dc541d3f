#pragma once

#include "dynkit/equilibria.hpp"
#include "dynkit/manifolds.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dynkit {

struct BranchPoint {
    double lambda = 0.0;
    Vec x;
    std::vector<cplx> eigenvalues;
    Stability stability = Stability::Inconclusive;
};

// lambda is monotone along one branch.
struct Branch {
    std::string param;
    std::vector<BranchPoint> points;
};

// A fold sits between branches[i] and branches[i + 1].
struct FoldPoint {
    double lambda = 0.0;
    Vec x;
};

struct Continuation {
    std::string param;
    std::vector<Branch> branches;
    std::vector<FoldPoint> folds;
};

struct ContinuationOptions {
    double step = 0.01;
    int max_points = 20000;
    double tol = 1e-10;
    int max_folds = 16;
};

// Natural-parameter continuation of f = 0 (flows) or F(x) = x (maps) from an
// equilibrium at lambda_start toward lambda_end. Near-singular steps go
// through pseudo-arclength; every fold turns the sweep around and opens a
// new branch. Stops when lambda leaves [lambda_start, lambda_end].
Continuation continue_branch(const SystemDef& sys, const std::string& param, const Vec& x_start,
                             double lambda_start, double lambda_end, const ContinuationOptions& opts = {});

enum class BifKind { SaddleNode, Transcritical, Pitchfork, Hopf, Flip, NeimarkSacker };
const char* bif_kind_name(BifKind k);

struct BifurcationEvent {
    BifKind kind = BifKind::SaddleNode;
    double lambda_c = 0.0;
    Vec location;
    nlohmann::json data = nlohmann::json::object();
    double confidence = 1.0;
    // Half-width of the final bracket: the test function has opposite signs
    // at lambda_c -+ bracket.
    double bracket = 0.0;
};

std::vector<BifurcationEvent> detect_bifurcations(const SystemDef& sys, const Continuation& c);

nlohmann::json event_json(const BifurcationEvent& e);
nlohmann::json events_json(const std::vector<BifurcationEvent>& es);

using CoeffTable = std::map<std::pair<int, int>, double>;

// Reduced one-dimensional field u' = sum c_pq u^p mu^q, mu = lambda - lambda_c,
// on the parameter-extended center manifold. u runs along `direction`,
// normalized so its largest entry is +1.
struct LocalCoeffs {
    CoeffTable c;
    std::optional<std::map<std::pair<int, int>, Rational>> exact;
    Vec direction;
};

LocalCoeffs local_taylor_coeffs(const SystemDef& sys, const std::string& param, const Vec& x_c, double lambda_c);

// Flow g = F - x with the same parameters, so fixed points of a map become
// equilibria.
SystemDef difference_flow(const SystemDef& sys);

// Diagonal +-1 involution S with f(Sx) = S f(x), S x_c = x_c and
// S v = -v, found by trying all sign patterns.
std::optional<std::vector<int>> odd_symmetry(const SystemDef& sys, const Vec& x_c, const Vec& v, double tol = 1e-12);

struct LocalBifurcation {
    BifKind kind = BifKind::SaddleNode;
    // Sign of lambda on which the new equilibria exist (saddle-node, pitchfork).
    int side = 0;
    bool supercritical = false;  // pitchfork only
    bool upper_stable = false;   // saddle-node: stability of u+
    // u^2 = branch_coeff * lambda (pitchfork, saddle-node); u = slopes[i] * lambda (transcritical)
    double branch_coeff = 0.0;
    std::vector<double> slopes;
    std::vector<bool> slope_stable_positive;  // stability of each slope branch for lambda > 0
    nlohmann::json json() const;
};

// Throws Degenerate when the coefficients fit none of the three cases.
LocalBifurcation classify_local_bif(const CoeffTable& c, bool symmetry_odd, double tol = 1e-8);

struct PolygonSegment {
    std::pair<int, int> from, to;
    double slope = 0.0;  // dq/dp
};

struct NewtonPolygon {
    std::vector<std::pair<int, int>> support;
    std::vector<std::pair<int, int>> vertices;
    std::vector<PolygonSegment> segments;
    // u ~ lambda^mu along each segment, mu = -slope, deduplicated.
    std::vector<double> exponents;
};

NewtonPolygon newton_polygon(const CoeffTable& c, double tol = 0.0);

struct DiagramOptions {
    long transient = 1000;
    long keep = 100;
    Vec x0;  // defaults to 0.5 in every coordinate
};

struct Diagram {
    std::vector<std::pair<double, double>> points;  // (lambda, first coordinate)
    std::vector<std::string> notes;
};

Diagram bifurcation_diagram(const SystemDef& sys, const std::string& param, const std::vector<double>& lambdas,
                            const DiagramOptions& opts = {});
Diagram bifurcation_diagram_serial(const SystemDef& sys, const std::string& param,
                                   const std::vector<double>& lambdas, const DiagramOptions& opts = {});

// lambda,x
std::string diagram_csv(const Diagram& d);

}  // namespace dynkit
