#pragma once

#include "rcov/types.hpp"

#include <span>
#include <vector>

namespace rcov {

// Gaussian Kullback-Leibler discrepancy
//   trace(S_hat S_true^-1 - I) - log det(S_hat S_true^-1).
// Zero iff the matrices are equal. Computed through Cholesky factors, never
// an explicit inverse. Throws NotPositiveDefinite.
double kl_discrepancy(const Matrix& S_hat, const Matrix& S_true);

// Mahalanobis distances sqrt((x_i - mu)^T Sigma^-1 (x_i - mu)) of the rows
// of X. Rows must be complete (callers impute first).
Vector mahalanobis(const Matrix& X, const Vector& center, const Matrix& Sigma);

struct RocCurve {
  std::vector<double> thresholds;  // decreasing; score >= threshold => flagged
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auc = 0.0;
};

// ROC over all distinct thresholds; higher scores mean "more anomalous".
// The trapezoidal AUC equals the Mann-Whitney statistic with ties counted
// half. Throws SingleClass when labels are all 0 or all 1.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

// Average ranks (1-based, ties get the mean rank of their run).
std::vector<double> average_ranks(std::span<const double> x);
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  return average_ranks(std::span<const double>(x.data(), x.size()));
}

// Pearson correlation of average ranks. Throws ConstantInput.
double spearman_corr(std::span<const double> x, std::span<const double> y);
inline double spearman_corr(const std::vector<double>& x,
                            const std::vector<double>& y) {
  return spearman_corr(std::span<const double>(x.data(), x.size()),
                       std::span<const double>(y.data(), y.size()));
}

// Mean Spearman correlation over paired columns of U and V.
double mcc(const Matrix& U, const Matrix& V);

}  // namespace rcov
