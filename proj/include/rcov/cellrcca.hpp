#pragma once

#include "rcov/cellrcov.hpp"
#include "rcov/types.hpp"

#include <functional>
#include <utility>

namespace rcov {

// Canonical directions and correlations for two blocks of variables.
struct CcaResult {
  Matrix A;             // p x k directions for block 1; a^T Sigma1 a = I
  Matrix B;             // q x k directions for block 2
  Vector correlations;  // k, nonincreasing, in [0, 1]
  Vector centers;       // p + q
  Matrix Sigma1, Sigma2, Sigma12;
};

// Canonical analysis of an explicit (p+q) x (p+q) covariance matrix via
// symmetric whitening: the SVD of Sigma1^{-1/2} Sigma12 Sigma2^{-1/2} gives
// the correlations and paired directions. Signs are fixed so each column of
// A has its largest-magnitude entry positive. Throws BlockNotPD when a
// diagonal block is not positive definite.
CcaResult cca_from_covariance(const Matrix& Sigma, const Vector& centers,
                              Index p, Index q, Index k);

// Fit the joint covariance of [X1 ; X2] with the cellwise-robust estimator
// and extract the canonical structure from its blocks.
CcaResult cellrcca_fit(const DataMatrix& X1, const DataMatrix& X2, Index k,
                       const CellRcovConfig& config = {});

// Canonical variables U = (X1 - 1 mu1^T) A and V = (X2 - 1 mu2^T) B.
std::pair<Matrix, Matrix> cellrcca_transform(const CcaResult& result,
                                             const Matrix& X1,
                                             const Matrix& X2);

// Cross-validated mean canonical correlation with a caller-supplied fitter;
// masked test cells are imputed with the fitted centers before projecting.
// Failed folds are dropped; at least half must survive.
using CcaFitter =
    std::function<CcaResult(const DataMatrix&, const DataMatrix&, Index)>;
double cca_cv(const DataMatrix& X1, const DataMatrix& X2, Index k, int folds,
              std::uint64_t seed, const CcaFitter& fitter);

// 10-fold (by default) cross-validated MCC of the robust fit.
double cellrcca_cv(const DataMatrix& X1, const DataMatrix& X2, Index k,
                   int folds = 10, const CellRcovConfig& config = {});

}  // namespace rcov
