#include "rcov/kernels.hpp"

#include "rcov/errors.hpp"
#include "rcov/metrics.hpp"
#include "rcov/threads.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace rcov::kernels {
namespace {

// Shared per-cell / per-row computations. Both the OpenMP and the serial
// entry points call these, so their outputs agree bit for bit and the only
// difference under test is the scheduling.

double crossprod_cell(const Matrix& G, Index j, Index l) {
  return G.col(j).dot(G.col(l));
}

double pairwise_cov_cell(const DataMatrix& X, Index j, Index l) {
  double sx = 0.0, sy = 0.0;
  Index n = 0;
  for (Index i = 0; i < X.rows(); ++i) {
    if (!X.observed(i, j) || !X.observed(i, l)) continue;
    sx += X.values(i, j);
    sy += X.values(i, l);
    ++n;
  }
  if (n < 2)
    throw Error("pairwise covariance: columns " + std::to_string(j) + "," +
                std::to_string(l) + " share fewer than 2 observed cases");
  double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double acc = 0.0;
  for (Index i = 0; i < X.rows(); ++i) {
    if (!X.observed(i, j) || !X.observed(i, l)) continue;
    acc += (X.values(i, j) - mx) * (X.values(i, l) - my);
  }
  return acc / static_cast<double>(n - 1);
}

double pairwise_spearman_cell(const DataMatrix& X, Index j, Index l) {
  std::vector<double> xs, ys;
  for (Index i = 0; i < X.rows(); ++i) {
    if (!X.observed(i, j) || !X.observed(i, l)) continue;
    xs.push_back(X.values(i, j));
    ys.push_back(X.values(i, l));
  }
  if (xs.size() < 3)
    throw Error("pairwise spearman: columns " + std::to_string(j) + "," +
                std::to_string(l) + " share fewer than 3 observed cases");
  std::vector<double> rx = average_ranks(xs), ry = average_ranks(ys);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(rx.size());
  my /= static_cast<double>(ry.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;  // constant on the joint subset
  return sxy / std::sqrt(sxx * syy);
}

double mahalanobis_sq_row(const Matrix& X, Index i, const Vector& center,
                          const Matrix& L) {
  Vector diff = X.row(i).transpose() - center;
  Vector y = L.triangularView<Eigen::Lower>().solve(diff);
  return y.squaredNorm();
}

Vector observed_col_means(const DataMatrix& X) {
  Vector means(X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    double s = 0.0;
    Index n = 0;
    for (Index i = 0; i < X.rows(); ++i)
      if (X.observed(i, j)) {
        s += X.values(i, j);
        ++n;
      }
    if (n == 0)
      throw Error("column " + std::to_string(j) + " has no observed cells");
    means(j) = s / static_cast<double>(n);
  }
  return means;
}

// Rethrow-through-OpenMP helper: exceptions cannot escape a parallel region.
template <class Body>
void parallel_pairs(Index p, Body body) {
  bool failed = false;
  std::string msg;
#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
  for (Index j = 0; j < p; ++j) {
    try {
      for (Index l = j; l < p; ++l) body(j, l);
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        msg = e.what();
      }
    }
  }
  if (failed) throw Error(msg);
}

}  // namespace

Matrix crossprod(const Matrix& G) {
  const Index p = G.cols();
  Matrix out(p, p);
  parallel_pairs(p, [&](Index j, Index l) {
    double v = crossprod_cell(G, j, l);
    out(j, l) = v;
    out(l, j) = v;
  });
  return out;
}

Matrix pairwise_complete_covariance(const DataMatrix& X, Vector* col_means) {
  const Index p = X.cols();
  Matrix out(p, p);
  parallel_pairs(p, [&](Index j, Index l) {
    double v = pairwise_cov_cell(X, j, l);
    out(j, l) = v;
    out(l, j) = v;
  });
  if (col_means != nullptr) *col_means = observed_col_means(X);
  return out;
}

Matrix pairwise_spearman(const DataMatrix& X) {
  const Index p = X.cols();
  Matrix out(p, p);
  parallel_pairs(p, [&](Index j, Index l) {
    double v = (j == l) ? 1.0 : pairwise_spearman_cell(X, j, l);
    out(j, l) = v;
    out(l, j) = v;
  });
  return out;
}

Vector mahalanobis_sq(const Matrix& X, const Vector& center, const Matrix& L) {
  Vector out(X.rows());
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (Index i = 0; i < X.rows(); ++i)
    out(i) = mahalanobis_sq_row(X, i, center, L);
  return out;
}

namespace serial {

Matrix crossprod(const Matrix& G) {
  const Index p = G.cols();
  Matrix out(p, p);
  for (Index j = 0; j < p; ++j)
    for (Index l = j; l < p; ++l) {
      double v = crossprod_cell(G, j, l);
      out(j, l) = v;
      out(l, j) = v;
    }
  return out;
}

Matrix pairwise_complete_covariance(const DataMatrix& X, Vector* col_means) {
  const Index p = X.cols();
  Matrix out(p, p);
  for (Index j = 0; j < p; ++j)
    for (Index l = j; l < p; ++l) {
      double v = pairwise_cov_cell(X, j, l);
      out(j, l) = v;
      out(l, j) = v;
    }
  if (col_means != nullptr) *col_means = observed_col_means(X);
  return out;
}

Matrix pairwise_spearman(const DataMatrix& X) {
  const Index p = X.cols();
  Matrix out(p, p);
  for (Index j = 0; j < p; ++j)
    for (Index l = j; l < p; ++l) {
      double v = (j == l) ? 1.0 : pairwise_spearman_cell(X, j, l);
      out(j, l) = v;
      out(l, j) = v;
    }
  return out;
}

Vector mahalanobis_sq(const Matrix& X, const Vector& center, const Matrix& L) {
  Vector out(X.rows());
  for (Index i = 0; i < X.rows(); ++i)
    out(i) = mahalanobis_sq_row(X, i, center, L);
  return out;
}

}  // namespace serial
}  // namespace rcov::kernels
