#pragma once

// Dense exact linear algebra over Rational, row-major nested vectors.

#include "dynkit/core.hpp"
#include "dynkit/rational.hpp"

#include <optional>
#include <vector>

namespace dynkit {

using RVec = std::vector<Rational>;
using RMat = std::vector<RVec>;

RMat rat_identity(int n);
RMat rat_mul(const RMat& a, const RMat& b);
// Solves M x = b by Gauss elimination; nullopt when M is singular.
std::optional<RVec> rat_solve(RMat M, RVec b);
std::optional<RMat> rat_inverse(const RMat& M);
// Entry-wise rationalize_strict; nullopt if any entry has no small fraction.
std::optional<RMat> rationalize_matrix(const Mat& A);
Mat to_double(const RMat& A);

}  // namespace dynkit
