#include "rcov/metrics.hpp"

#include "rcov/errors.hpp"
#include "rcov/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rcov {

namespace {

// Cholesky factor or NotPositiveDefinite.
Matrix chol_or_throw(const Matrix& S, const char* name) {
  if (S.rows() != S.cols()) throw DimensionMismatch("matrix is not square");
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite(std::string(name) +
                              " is not positive definite");
  return llt.matrixL();
}

double logdet_from_chol(const Matrix& L) {
  double s = 0.0;
  for (Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
  return 2.0 * s;
}

}  // namespace

double kl_discrepancy(const Matrix& S_hat, const Matrix& S_true) {
  if (S_hat.rows() != S_true.rows() || S_hat.cols() != S_true.cols())
    throw DimensionMismatch("kl_discrepancy: shape mismatch");
  Matrix L_true = chol_or_throw(S_true, "S_true");
  Matrix L_hat = chol_or_throw(S_hat, "S_hat");
  // trace(S_hat S_true^-1) = ||L_true^-1 L_hat||_F^2
  Matrix W = L_true.triangularView<Eigen::Lower>().solve(L_hat);
  double tr = W.squaredNorm();
  double logdet_ratio = logdet_from_chol(L_hat) - logdet_from_chol(L_true);
  const double p = static_cast<double>(S_hat.rows());
  return tr - p - logdet_ratio;
}

Vector mahalanobis(const Matrix& X, const Vector& center, const Matrix& Sigma) {
  if (X.cols() != center.size() || Sigma.rows() != center.size())
    throw DimensionMismatch("mahalanobis: shape mismatch");
  Matrix L = chol_or_throw(Sigma, "Sigma");
  Vector sq = kernels::mahalanobis_sq(X, center, L);
  return sq.cwiseSqrt();
}

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw DimensionMismatch("roc_auc: scores/labels length mismatch");
  std::size_t pos = 0, neg = 0;
  for (int l : labels) (l != 0 ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw SingleClass("roc_auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve curve;
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    double threshold = scores[order[i]];
    // advance through the whole tie group
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]] != 0)
        tp += 1.0;
      else
        fp += 1.0;
      ++i;
    }
    curve.thresholds.push_back(threshold);
    curve.tpr.push_back(tp / static_cast<double>(pos));
    curve.fpr.push_back(fp / static_cast<double>(neg));
  }

  // trapezoid over (fpr, tpr) from the implicit origin; tie groups produce
  // diagonal segments, which is exactly the Mann-Whitney half-credit
  double auc = 0.0, prev_fpr = 0.0, prev_tpr = 0.0;
  for (std::size_t t = 0; t < curve.fpr.size(); ++t) {
    auc += (curve.fpr[t] - prev_fpr) * (curve.tpr[t] + prev_tpr) * 0.5;
    prev_fpr = curve.fpr[t];
    prev_tpr = curve.tpr[t];
  }
  curve.auc = auc;
  return curve;
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_corr(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DimensionMismatch("spearman_corr: length mismatch");
  if (x.size() < 3) throw Error("spearman_corr: need at least 3 points");
  std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  double n = static_cast<double>(x.size());
  double mean = 0.5 * (n + 1.0);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw ConstantInput("spearman_corr: constant input");
  return sxy / std::sqrt(sxx * syy);
}

double mcc(const Matrix& U, const Matrix& V) {
  if (U.rows() != V.rows() || U.cols() != V.cols())
    throw DimensionMismatch("mcc: shape mismatch");
  if (U.cols() < 1) throw Error("mcc: need at least one canonical pair");
  double acc = 0.0;
  for (Index l = 0; l < U.cols(); ++l) {
    std::vector<double> u(U.col(l).data(), U.col(l).data() + U.rows());
    std::vector<double> v(V.col(l).data(), V.col(l).data() + V.rows());
    acc += spearman_corr(u, v);
  }
  return acc / static_cast<double>(U.cols());
}

}  // namespace rcov
