#include "dynkit/core.hpp"

#include <algorithm>

namespace dynkit {

const char* err_name(Err e) {
    switch (e) {
    case Err::UnknownSystem: return "UnknownSystem";
    case Err::UnknownParam: return "UnknownParam";
    case Err::DimensionMismatch: return "DimensionMismatch";
    case Err::StepLimitExceeded: return "StepLimitExceeded";
    case Err::NonFiniteState: return "NonFiniteState";
    case Err::NoConvergence: return "NoConvergence";
    case Err::SingularJacobian: return "SingularJacobian";
    case Err::NotHurwitz: return "NotHurwitz";
    case Err::IllConditionedSplit: return "IllConditionedSplit";
    case Err::ResonanceObstruction: return "ResonanceObstruction";
    case Err::OrderTooHigh: return "OrderTooHigh";
    case Err::StrongResonance: return "StrongResonance";
    case Err::SmallDivisor: return "SmallDivisor";
    case Err::NoCycleFound: return "NoCycleFound";
    case Err::PoorFit: return "PoorFit";
    case Err::NoReturn: return "NoReturn";
    case Err::TangentialCrossing: return "TangentialCrossing";
    case Err::CollapsedToEquilibrium: return "CollapsedToEquilibrium";
    case Err::CascadeLost: return "CascadeLost";
    case Err::NotCritical: return "NotCritical";
    case Err::BranchLost: return "BranchLost";
    case Err::EmptySupport: return "EmptySupport";
    case Err::Degenerate: return "Degenerate";
    case Err::DegenerateCloud: return "DegenerateCloud";
    case Err::DepthTooLarge: return "DepthTooLarge";
    case Err::InvalidWord: return "InvalidWord";
    case Err::Escaped: return "Escaped";
    case Err::SchemaViolation: return "SchemaViolation";
    case Err::Usage: return "Usage";
    }
    return "Unknown";
}

bool is_usage_error(Err e) {
    switch (e) {
    case Err::UnknownSystem:
    case Err::UnknownParam:
    case Err::DimensionMismatch:
    case Err::SchemaViolation:
    case Err::InvalidWord:
    case Err::Usage:
        return true;
    default:
        return false;
    }
}

Error::Error(Err kind, const std::string& msg)
    : std::runtime_error(std::string(err_name(kind)) + ": " + msg), kind_(kind) {}

std::vector<cplx> sorted_eigenvalues(const Mat& A) {
    std::vector<cplx> out;
    if (A.rows() == 0) return out;
    Eigen::EigenSolver<Mat> es(A, false);
    for (Eigen::Index i = 0; i < A.rows(); ++i) out.push_back(es.eigenvalues()[i]);
    std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return out;
}

bool all_finite(const Vec& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

}  // namespace dynkit
