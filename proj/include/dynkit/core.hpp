#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynkit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

enum class Err {
    UnknownSystem,
    UnknownParam,
    DimensionMismatch,
    StepLimitExceeded,
    NonFiniteState,
    NoConvergence,
    SingularJacobian,
    NotHurwitz,
    IllConditionedSplit,
    ResonanceObstruction,
    OrderTooHigh,
    StrongResonance,
    SmallDivisor,
    NoCycleFound,
    PoorFit,
    NoReturn,
    TangentialCrossing,
    CollapsedToEquilibrium,
    CascadeLost,
    NotCritical,
    BranchLost,
    EmptySupport,
    Degenerate,
    DegenerateCloud,
    DepthTooLarge,
    InvalidWord,
    Escaped,
    SchemaViolation,
    Usage,
};

const char* err_name(Err e);

// Usage-type errors map to CLI exit code 2, everything else to 3.
bool is_usage_error(Err e);

class Error : public std::runtime_error {
public:
    Error(Err kind, const std::string& msg);
    Err kind() const { return kind_; }

private:
    Err kind_;
};

// Eigenvalues sorted by (real, imag) descending so reports are reproducible.
std::vector<cplx> sorted_eigenvalues(const Mat& A);

bool all_finite(const Vec& x);

}  // namespace dynkit
