#include "rcov/cellrcca.hpp"

#include "rcov/errors.hpp"
#include "rcov/metrics.hpp"
#include "rcov/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace rcov {

namespace {

// Sigma^{-1/2} through the symmetric eigendecomposition.
Matrix inverse_sqrt(const Matrix& S, const char* which) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (S + S.transpose()));
  if (eig.info() != Eigen::Success)
    throw BlockNotPD(std::string(which) + ": eigendecomposition failed");
  const Vector& ev = eig.eigenvalues();
  if (ev.minCoeff() <= 0.0)
    throw BlockNotPD(std::string(which) + " block is not positive definite");
  Vector inv = ev.cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

DataMatrix hcat(const DataMatrix& X1, const DataMatrix& X2) {
  if (X1.rows() != X2.rows())
    throw DimensionMismatch("blocks must have equal row counts");
  DataMatrix out;
  out.values.resize(X1.rows(), X1.cols() + X2.cols());
  out.mask.resize(X1.rows(), X1.cols() + X2.cols());
  out.values << X1.values, X2.values;
  out.mask << X1.mask, X2.mask;
  return out;
}

DataMatrix rows_of(const DataMatrix& X, const std::vector<Index>& rows) {
  DataMatrix out;
  out.values.resize(static_cast<Index>(rows.size()), X.cols());
  out.mask.resize(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    out.values.row(static_cast<Index>(t)) = X.values.row(rows[t]);
    out.mask.row(static_cast<Index>(t)) = X.mask.row(rows[t]);
  }
  return out;
}

// complete matrix with masked cells replaced by the given centers
Matrix impute_with_center(const DataMatrix& X, const Vector& center) {
  Matrix out = X.values;
  for (Index j = 0; j < X.cols(); ++j)
    for (Index i = 0; i < X.rows(); ++i)
      if (!X.observed(i, j)) out(i, j) = center(j);
  return out;
}

}  // namespace

CcaResult cca_from_covariance(const Matrix& Sigma, const Vector& centers,
                              Index p, Index q, Index k) {
  if (Sigma.rows() != p + q || Sigma.cols() != p + q)
    throw DimensionMismatch("cca: covariance must be (p+q) x (p+q)");
  if (centers.size() != p + q)
    throw DimensionMismatch("cca: centers must have length p + q");
  if (k < 1 || k > std::min(p, q))
    throw Error("cca: need 1 <= k <= min(p, q)");

  CcaResult out;
  out.Sigma1 = Sigma.topLeftCorner(p, p);
  out.Sigma2 = Sigma.bottomRightCorner(q, q);
  out.Sigma12 = Sigma.topRightCorner(p, q);
  out.centers = centers;

  Matrix W1 = inverse_sqrt(out.Sigma1, "Sigma1");
  Matrix W2 = inverse_sqrt(out.Sigma2, "Sigma2");
  Matrix M = W1 * out.Sigma12 * W2;
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);

  out.A = W1 * svd.matrixU().leftCols(k);
  out.B = W2 * svd.matrixV().leftCols(k);
  out.correlations = svd.singularValues().head(k).cwiseMin(1.0);

  // deterministic signs: the largest-|.| entry of each a_l is positive;
  // b_l flips together with a_l so the correlation keeps its sign
  for (Index l = 0; l < k; ++l) {
    Index imax = 0;
    out.A.col(l).cwiseAbs().maxCoeff(&imax);
    if (out.A(imax, l) < 0.0) {
      out.A.col(l) = -out.A.col(l);
      out.B.col(l) = -out.B.col(l);
    }
  }
  return out;
}

CcaResult cellrcca_fit(const DataMatrix& X1, const DataMatrix& X2, Index k,
                       const CellRcovConfig& config) {
  if (k > std::min(X1.cols(), X2.cols()))
    throw Error("cellrcca_fit: k exceeds min(p, q)");
  DataMatrix joint = hcat(X1, X2);
  CovarianceEstimate est = estimate(joint, config);
  return cca_from_covariance(est.Sigma_hat, est.center, X1.cols(), X2.cols(),
                             k);
}

std::pair<Matrix, Matrix> cellrcca_transform(const CcaResult& result,
                                             const Matrix& X1,
                                             const Matrix& X2) {
  const Index p = result.A.rows(), q = result.B.rows();
  if (X1.cols() != p || X2.cols() != q || X1.rows() != X2.rows())
    throw DimensionMismatch("cellrcca_transform: shape mismatch");
  Matrix C1 = X1.rowwise() - result.centers.head(p).transpose();
  Matrix C2 = X2.rowwise() - result.centers.tail(q).transpose();
  return {C1 * result.A, C2 * result.B};
}

double cca_cv(const DataMatrix& X1, const DataMatrix& X2, Index k, int folds,
              std::uint64_t seed, const CcaFitter& fitter) {
  const Index n = X1.rows();
  if (X2.rows() != n)
    throw DimensionMismatch("cca_cv: blocks must have equal row counts");
  if (folds < 2) throw Error("cca_cv: need at least 2 folds");
  if (n / folds < 3)
    throw SingleCaseFold(
        "cca_cv: folds leave fewer than 3 test cases (Spearman needs 3)");

  // random permutation -> contiguous folds
  Rng rng = Rng(seed).stream(0xCCA);
  std::vector<std::size_t> perm = rng.sample_without_replacement(
      static_cast<std::size_t>(n), static_cast<std::size_t>(n));

  double acc = 0.0;
  int surviving = 0;
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> test, train;
    for (std::size_t t = 0; t < perm.size(); ++t) {
      if (static_cast<int>(t % static_cast<std::size_t>(folds)) == f)
        test.push_back(static_cast<Index>(perm[t]));
      else
        train.push_back(static_cast<Index>(perm[t]));
    }
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    try {
      CcaResult fit = fitter(rows_of(X1, train), rows_of(X2, train), k);
      const Index p = X1.cols();
      Matrix T1 = impute_with_center(rows_of(X1, test), fit.centers.head(p));
      Matrix T2 = impute_with_center(rows_of(X2, test),
                                     fit.centers.tail(X2.cols()));
      auto uv = cellrcca_transform(fit, T1, T2);
      acc += mcc(uv.first, uv.second);
      ++surviving;
    } catch (const Error&) {
      // failed fold: dropped
    }
  }
  if (2 * surviving < folds)
    throw Error("cca_cv: fewer than half of the folds survived");
  return acc / static_cast<double>(surviving);
}

double cellrcca_cv(const DataMatrix& X1, const DataMatrix& X2, Index k,
                   int folds, const CellRcovConfig& config) {
  return cca_cv(X1, X2, k, folds, config.seed,
                [&config](const DataMatrix& A, const DataMatrix& B, Index kk) {
                  return cellrcca_fit(A, B, kk, config);
                });
}

}  // namespace rcov
