#pragma once

#include "rcov/types.hpp"

namespace rcov::kernels {

// Data-parallel kernels used by the estimators. Each parallel loop writes
// disjoint output slots (or reduces over a thread-invariant index range per
// output cell), so results are bitwise identical for any thread count and
// bitwise equal to the serial reference implementations below.

// G^T * G, parallelized over the upper triangle of the output.
Matrix crossprod(const Matrix& G);

// Pairwise-complete sample covariance (denominator n_jl - 1, means computed
// per pair on jointly observed cases). Entries with fewer than 2 complete
// pairs throw. Optionally reports per-column observed means.
Matrix pairwise_complete_covariance(const DataMatrix& X,
                                    Vector* col_means = nullptr);

// Pairwise-complete Spearman rank correlation matrix (average ranks on ties).
Matrix pairwise_spearman(const DataMatrix& X);

// Squared Mahalanobis distances of the rows of X given a Cholesky factor L
// of Sigma (Sigma = L L^T), parallelized over rows.
Vector mahalanobis_sq(const Matrix& X, const Vector& center, const Matrix& L);

// Serial reference implementations, kept for testing and benchmarking.
namespace serial {
Matrix crossprod(const Matrix& G);
Matrix pairwise_complete_covariance(const DataMatrix& X,
                                    Vector* col_means = nullptr);
Matrix pairwise_spearman(const DataMatrix& X);
Vector mahalanobis_sq(const Matrix& X, const Vector& center, const Matrix& L);
}  // namespace serial

}  // namespace rcov::kernels
