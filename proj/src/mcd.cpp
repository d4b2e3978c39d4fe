#include "rcov/mcd.hpp"

#include "rcov/errors.hpp"
#include "rcov/kernels.hpp"
#include "rcov/metrics.hpp"
#include "rcov/mscale.hpp"
#include "rcov/threads.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace rcov {

namespace {

struct MeanCov {
  Vector mean;
  Matrix cov;     // (h-1)-denominator sample covariance, symmetrized
  double det;    // from the Cholesky factor
  Matrix chol;   // lower factor
};

MeanCov mean_cov(const Matrix& U, const std::vector<Index>& rows) {
  const Index k = U.cols();
  const double h = static_cast<double>(rows.size());
  MeanCov out;
  out.mean = Vector::Zero(k);
  for (Index i : rows) out.mean += U.row(i).transpose();
  out.mean /= h;
  Matrix S = Matrix::Zero(k, k);
  for (Index i : rows) {
    Vector d = U.row(i).transpose() - out.mean;
    S.noalias() += d * d.transpose();
  }
  S /= (h - 1.0);
  out.cov = 0.5 * (S + S.transpose());
  Eigen::LLT<Matrix> llt(out.cov);
  if (llt.info() != Eigen::Success)
    throw SingularScatter(
        "mcd: support lies in a lower-dimensional affine subspace");
  out.chol = llt.matrixL();
  double logdet = 0.0;
  for (Index i = 0; i < k; ++i) logdet += std::log(out.chol(i, i));
  out.det = std::exp(2.0 * logdet);
  return out;
}

// h indices with the smallest squared distances; ties resolved by index.
std::vector<Index> smallest_h(const Vector& d2, Index h) {
  std::vector<Index> idx(static_cast<std::size_t>(d2.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Index a, Index b) { return d2(a) < d2(b); });
  idx.resize(static_cast<std::size_t>(h));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<Index> refine_support(const Matrix& Y, std::vector<Index> support,
                                  int max_steps) {
  for (int step = 0; step < max_steps; ++step) {
    MeanCov mc = mean_cov(Y, support);
    Vector d2 = kernels::mahalanobis_sq(Y, mc.mean, mc.chol);
    std::vector<Index> next = smallest_h(d2, static_cast<Index>(support.size()));
    if (next == support) break;
    support = std::move(next);
  }
  return support;
}

Matrix sample_correlation(const Matrix& Y) {
  const Index n = Y.rows();
  Vector mean = Y.colwise().mean().transpose();
  Matrix C = Y.rowwise() - mean.transpose();
  Matrix S = (C.transpose() * C) / static_cast<double>(n - 1);
  Vector sd = S.diagonal().cwiseSqrt();
  for (Index j = 0; j < S.cols(); ++j)
    for (Index i = 0; i < S.rows(); ++i) {
      double denom = sd(i) * sd(j);
      S(i, j) = denom > 0.0 ? S(i, j) / denom : (i == j ? 1.0 : 0.0);
    }
  return S;
}

Matrix spatial_sign_covariance(const Matrix& Y) {
  const Index n = Y.rows(), k = Y.cols();
  Matrix S = Matrix::Zero(k, k);
  for (Index i = 0; i < n; ++i) {
    double norm = Y.row(i).norm();
    if (norm == 0.0) continue;
    Vector s = Y.row(i).transpose() / norm;
    S.noalias() += s * s.transpose();
  }
  return S / static_cast<double>(n);
}

Vector spatial_median(const Matrix& Y) {
  const Index k = Y.cols();
  Vector m(k);
  for (Index j = 0; j < k; ++j) {
    std::vector<double> col(Y.col(j).data(), Y.col(j).data() + Y.rows());
    m(j) = median(std::move(col));
  }
  for (int it = 0; it < 50; ++it) {
    Vector num = Vector::Zero(k);
    double den = 0.0;
    for (Index i = 0; i < Y.rows(); ++i) {
      double dist = (Y.row(i).transpose() - m).norm();
      if (dist < 1e-12) continue;
      num += Y.row(i).transpose() / dist;
      den += 1.0 / dist;
    }
    if (den == 0.0) break;
    Vector next = num / den;
    if ((next - m).norm() <= 1e-10 * (1.0 + m.norm())) {
      m = next;
      break;
    }
    m = next;
  }
  return m;
}

std::vector<Index> half_by_key(const Vector& key, Index h0) {
  std::vector<Index> idx(static_cast<std::size_t>(key.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Index a, Index b) { return key(a) < key(b); });
  idx.resize(static_cast<std::size_t>(h0));
  return idx;
}

Matrix cov_of_rows(const Matrix& Y, const std::vector<Index>& rows) {
  const Index k = Y.cols();
  Vector mean = Vector::Zero(k);
  for (Index i : rows) mean += Y.row(i).transpose();
  mean /= static_cast<double>(rows.size());
  Matrix S = Matrix::Zero(k, k);
  for (Index i : rows) {
    Vector d = Y.row(i).transpose() - mean;
    S.noalias() += d * d.transpose();
  }
  return S / static_cast<double>(rows.size() - 1);
}

}  // namespace

double consistency_factor(double alpha, int k) {
  if (!(alpha >= 0.5) || !(alpha <= 1.0))
    throw Error("consistency_factor: alpha must lie in [0.5, 1]");
  if (k < 1) throw Error("consistency_factor: k must be >= 1");
  if (alpha >= 1.0 - 1e-12) return 1.0;
  boost::math::chi_squared chi_k(static_cast<double>(k));
  boost::math::chi_squared chi_k2(static_cast<double>(k + 2));
  double q = boost::math::quantile(chi_k, alpha);
  return alpha / boost::math::cdf(chi_k2, q);
}

McdResult c_step(const Matrix& U, const McdResult& current) {
  const Index h = static_cast<Index>(current.support.size());
  Eigen::LLT<Matrix> llt(current.scatter);
  if (llt.info() != Eigen::Success)
    throw SingularScatter("c_step: current scatter is singular");
  Matrix L = llt.matrixL();
  Vector d2 = kernels::mahalanobis_sq(U, current.location, L);
  std::vector<Index> support = smallest_h(d2, h);
  MeanCov mc = mean_cov(U, support);
  McdResult out;
  out.location = std::move(mc.mean);
  out.scatter = std::move(mc.cov);
  out.support = std::move(support);
  out.raw_determinant = mc.det;
  out.consistency_factor = current.consistency_factor;
  return out;
}

McdResult mcd_estimate(const Matrix& U, double alpha) {
  const Index n = U.rows(), k = U.cols();
  if (k < 1) throw Error("mcd_estimate: need k >= 1");
  if (!(alpha >= 0.5) || !(alpha < 1.0))
    throw Error("mcd_estimate: alpha must lie in [0.5, 1)");
  if (n <= 2 * k)
    throw TooFewCases("mcd_estimate: need n > 2k cases");
  const Index h =
      static_cast<Index>(std::ceil(alpha * static_cast<double>(n)));
  const Index h0 = (n + 1) / 2;

  // Coordinatewise standardization; keeps the starts location/scale
  // equivariant and conditions the distance computations.
  Matrix Y(n, k);
  {
    RhoFunction rho = RhoFunction::tanh_default();
    for (Index j = 0; j < k; ++j) {
      std::vector<double> col(U.col(j).data(), U.col(j).data() + n);
      double m = median(col);
      double s;
      try {
        for (double& x : col) x -= m;
        s = m_scale(col, rho);
      } catch (const DegenerateScale&) {
        throw SingularScatter("mcd_estimate: coordinate " + std::to_string(j) +
                              " has a degenerate scale");
      }
      Y.col(j) = (U.col(j).array() - m) / s;
    }
  }

  // Six deterministic initial scatter candidates.
  std::vector<Matrix> starts;
  starts.push_back(sample_correlation(Y.array().tanh().matrix()));
  starts.push_back(kernels::pairwise_spearman(DataMatrix(Y)));
  starts.push_back(spatial_sign_covariance(Y));
  starts.push_back(cov_of_rows(Y, half_by_key(Y.col(0), h0)));
  starts.push_back(cov_of_rows(Y, half_by_key(Y.col(k - 1), h0)));
  {
    Vector nu = spatial_median(Y);
    Vector dist(n);
    for (Index i = 0; i < n; ++i)
      dist(i) = (Y.row(i).transpose() - nu).squaredNorm();
    starts.push_back(cov_of_rows(Y, half_by_key(dist, h0)));
  }

  const int n_starts = static_cast<int>(starts.size());
  std::vector<std::vector<Index>> supports(n_starts);
  std::vector<double> dets(n_starts,
                           std::numeric_limits<double>::infinity());
  std::vector<std::string> failures(n_starts);

#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
  for (int s = 0; s < n_starts; ++s) {
    try {
      // scale refinement of the candidate: robust scales along its axes
      Matrix S = 0.5 * (starts[s] + starts[s].transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
      Matrix E = eig.eigenvectors();
      Matrix B = Y * E;
      Vector lambda(k), center(k);
      RhoFunction rho = RhoFunction::tanh_default();
      for (Index j = 0; j < k; ++j) {
        std::vector<double> col(B.col(j).data(), B.col(j).data() + n);
        double m = median(col);
        for (double& x : col) x -= m;
        double sc = m_scale(col, rho);
        lambda(j) = sc * sc;
        center(j) = m;
      }
      Matrix Sigma0 = E * lambda.asDiagonal() * E.transpose();
      Vector mu0 = E * center;
      Eigen::LLT<Matrix> llt(Sigma0);
      if (llt.info() != Eigen::Success)
        throw SingularScatter("initial scatter is singular");
      Matrix L = llt.matrixL();
      Vector d2 = kernels::mahalanobis_sq(Y, mu0, L);
      std::vector<Index> support =
          refine_support(Y, smallest_h(d2, h), 100);
      // determinant for ranking, taken in the original coordinates so that
      // candidate order is invariant under affine maps of U
      MeanCov mc = mean_cov(U, support);
      supports[s] = std::move(support);
      dets[s] = mc.det;
    } catch (const std::exception& e) {
      failures[s] = e.what();
    }
  }

  int best = -1;
  for (int s = 0; s < n_starts; ++s)
    if (dets[s] < (best < 0 ? std::numeric_limits<double>::infinity()
                            : dets[best]))
      best = s;
  if (best < 0)
    throw SingularScatter("mcd_estimate: all starts degenerate (" +
                          failures[0] + ")");

  MeanCov mc = mean_cov(U, supports[best]);
  McdResult out;
  out.location = std::move(mc.mean);
  out.raw_determinant = mc.det;
  out.consistency_factor = consistency_factor(alpha, static_cast<int>(k));
  out.scatter = out.consistency_factor * mc.cov;
  out.support = std::move(supports[best]);
  return out;
}

}  // namespace rcov
