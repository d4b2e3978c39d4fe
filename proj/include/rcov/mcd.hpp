#pragma once

#include "rcov/types.hpp"

#include <vector>

namespace rcov {

// Minimum Covariance Determinant location/scatter of an n x k score matrix.
struct McdResult {
  Vector location;             // k
  Matrix scatter;              // k x k symmetric positive definite
  std::vector<Index> support;  // sorted retained case indices, size h
  double raw_determinant = 0.0;
  double consistency_factor = 1.0;
};

// Gaussian consistency factor alpha / F_{chi2(k+2)}(q_alpha), where q_alpha
// is the chi2(k) quantile at level alpha. Tends to 1 as alpha -> 1.
double consistency_factor(double alpha, int k);

// One concentration step: rank all cases by Mahalanobis distance under the
// current estimate, keep the h closest, recompute mean and sample
// covariance. The determinant never increases. Throws SingularScatter when
// the new support spans a lower-dimensional affine subspace.
McdResult c_step(const Matrix& U, const McdResult& current);

// Deterministic MCD with coverage h = ceil(alpha * n): six fixed initial
// scatter estimates (tanh-transform correlation, Spearman correlation,
// spatial-sign covariance, two coordinate-sorted half splits, spatial-median
// half), each refined by C-steps to convergence; the smallest determinant
// wins, ties to the first. The winning support's sample covariance is scaled
// by consistency_factor(alpha, k).
McdResult mcd_estimate(const Matrix& U, double alpha = 0.75);

}  // namespace rcov
