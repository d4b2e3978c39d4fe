#pragma once

#include "rcov/rng.hpp"
#include "rcov/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace testutil {

using rcov::Index;
using rcov::Matrix;
using rcov::Vector;

inline Matrix gaussian_matrix(Index n, Index p, rcov::Rng& rng) {
  Matrix X(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) X(i, j) = rng.gaussian();
  return X;
}

inline Matrix gaussian_with_cov(Index n, const Matrix& Sigma, rcov::Rng& rng) {
  Matrix L = Sigma.llt().matrixL();
  return gaussian_matrix(n, Sigma.rows(), rng) * L.transpose();
}

// (1/n)-denominator sample covariance, centered at the mean.
inline Matrix sample_cov_mle(const Matrix& X) {
  Vector mean = X.colwise().mean().transpose();
  Matrix C = X.rowwise() - mean.transpose();
  return (C.transpose() * C) / static_cast<double>(X.rows());
}

// (n-1)-denominator sample covariance.
inline Matrix sample_cov(const Matrix& X) {
  Vector mean = X.colwise().mean().transpose();
  Matrix C = X.rowwise() - mean.transpose();
  return (C.transpose() * C) / static_cast<double>(X.rows() - 1);
}

// Largest principal angle (radians) between the column spans.
inline double max_principal_angle(const Matrix& A, const Matrix& B) {
  Eigen::HouseholderQR<Matrix> qa(A), qb(B);
  Matrix Qa = qa.householderQ() * Matrix::Identity(A.rows(), A.cols());
  Matrix Qb = qb.householderQ() * Matrix::Identity(B.rows(), B.cols());
  Eigen::JacobiSVD<Matrix> svd(Qa.transpose() * Qb);
  double smin = svd.singularValues().minCoeff();
  if (smin > 1.0) smin = 1.0;
  if (smin < -1.0) smin = -1.0;
  return std::acos(smin);
}

inline double rel_frobenius(const Matrix& A, const Matrix& B) {
  return (A - B).norm() / B.norm();
}

}  // namespace testutil
