#include "rcov/cellpca.hpp"

#include "rcov/errors.hpp"
#include "rcov/threads.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace rcov {

namespace {

using MaskCol = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;

// Solve A x = b for small symmetric PSD A; on (near-)singularity retries
// with a relative jitter on the diagonal. Zero-trace systems return zero.
Vector solve_psd(Matrix A, const Vector& b) {
  double tr = A.trace();
  if (!(tr > 0.0)) return Vector::Zero(b.size());
  Vector x = A.ldlt().solve(b);
  double resid = (A * x - b).norm();
  if (std::isfinite(resid) && resid <= 1e-8 * (b.norm() + tr * x.norm()))
    return x;
  A.diagonal().array() += 1e-10 * (tr / static_cast<double>(A.rows()));
  return A.ldlt().solve(b);
}

struct WorkState {
  Matrix R;      // residuals, 0 at masked cells
  Vector t_hat;  // casewise deviations
};

WorkState compute_residuals(const DataMatrix& Z, const Vector& mu,
                            const Matrix& V, const Matrix& U,
                            const Vector& sigma1, const RhoFunction& rho1) {
  const Index n = Z.rows(), p = Z.cols();
  WorkState w;
  w.R = Matrix::Zero(n, p);
  w.t_hat.resize(n);
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    Index m_i = 0;
    for (Index j = 0; j < p; ++j) {
      if (!Z.observed(i, j)) continue;
      double r = Z.values(i, j) - mu(j) - V.row(j).dot(U.row(i));
      w.R(i, j) = r;
      acc += sigma1(j) * sigma1(j) * rho1.rho(r / sigma1(j));
      ++m_i;
    }
    w.t_hat(i) = m_i > 0 ? std::sqrt(acc / static_cast<double>(m_i)) : 0.0;
  }
  return w;
}

double objective_from(const DataMatrix& Z, const Vector& t_hat, double sigma2,
                      const RhoFunction& rho2) {
  double m_total = 0.0, acc = 0.0;
  for (Index i = 0; i < Z.rows(); ++i) {
    double m_i = static_cast<double>(Z.observed_in_row(i));
    m_total += m_i;
    acc += m_i * rho2.rho(t_hat(i) / sigma2);
  }
  return sigma2 * sigma2 * acc / m_total;
}

}  // namespace

Matrix SubspaceFit::fitted() const {
  return Vector::Ones(U.rows()) * mu.transpose() + U * V.transpose();
}

double total_deviation(const Vector& residuals,
                       const Eigen::Ref<const MaskCol>& mask,
                       const Vector& sigma1, const RhoFunction& rho1) {
  Index m_i = 0;
  double acc = 0.0;
  for (Index j = 0; j < residuals.size(); ++j) {
    if (mask(j) == 0) continue;
    ++m_i;
    acc += sigma1(j) * sigma1(j) * rho1.rho(residuals(j) / sigma1(j));
  }
  if (m_i == 0) throw EmptyRow("total_deviation: row has no observed cells");
  return std::sqrt(acc / static_cast<double>(m_i));
}

double loss(const DataMatrix& Z, const SubspaceFit& fit,
            const RhoFunction& rho1, const RhoFunction& rho2) {
  WorkState w = compute_residuals(Z, fit.mu, fit.V, fit.U, fit.sigma1, rho1);
  return objective_from(Z, w.t_hat, fit.sigma2, rho2);
}

Vector solve_scores(const Vector& z_row, const Eigen::Ref<const MaskCol>& mask,
                    const Vector& mu, const Matrix& V, const Vector& sigma1,
                    double /*sigma2*/, const RhoFunction& rho1,
                    const RhoFunction& /*rho2*/, const CellPcaOptions& options,
                    const Vector* warm_start) {
  const Index p = V.rows(), k = V.cols();
  std::vector<Index> obs;
  obs.reserve(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j)
    if (mask(j) != 0) obs.push_back(j);
  const Index m_i = static_cast<Index>(obs.size());
  if (m_i < k)
    throw RankDeficient("solve_scores: fewer observed cells than the rank");

  Matrix Vo(m_i, k);
  Vector zo(m_i), so(m_i);
  for (Index t = 0; t < m_i; ++t) {
    Vo.row(t) = V.row(obs[static_cast<std::size_t>(t)]);
    zo(t) = z_row(obs[static_cast<std::size_t>(t)]) -
            mu(obs[static_cast<std::size_t>(t)]);
    so(t) = sigma1(obs[static_cast<std::size_t>(t)]);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(Vo);
  if (qr.rank() < k)
    throw RankDeficient(
        "solve_scores: loading matrix is rank deficient on the observed "
        "coordinates");

  Vector u = (warm_start != nullptr) ? *warm_start : Vector(qr.solve(zo));

  auto assemble = [&](const Vector& at, Matrix* A, Vector* rhs) {
    A->setZero(k, k);
    rhs->setZero(k);
    for (Index t = 0; t < m_i; ++t) {
      double r = zo(t) - Vo.row(t).dot(at);
      double w = rho1.weight(r / so(t));
      if (w == 0.0) continue;
      A->noalias() += w * Vo.row(t).transpose() * Vo.row(t);
      rhs->noalias() += w * zo(t) * Vo.row(t).transpose();
    }
  };

  Matrix A(k, k);
  Vector rhs(k);
  for (int it = 0; it < options.max_inner; ++it) {
    assemble(u, &A, &rhs);
    Vector next = solve_psd(A, rhs);
    // first-order condition residual with the weights refreshed at `next`
    assemble(next, &A, &rhs);
    double foc = (A * next - rhs).norm();
    double step = (next - u).norm();
    u = next;
    if (foc < options.inner_tol || step <= 1e-12 * (1.0 + u.norm())) break;
  }
  return u;
}

Matrix cell_weights(const Matrix& R, const Vector& sigma1,
                    const RhoFunction& rho1) {
  Matrix W(R.rows(), R.cols());
  for (Index j = 0; j < R.cols(); ++j)
    for (Index i = 0; i < R.rows(); ++i)
      W(i, j) = rho1.weight(R(i, j) / sigma1(j));
  return W;
}

Vector case_weights(const SubspaceFit& fit, const RhoFunction& rho2) {
  Vector w(fit.t_hat.size());
  for (Index i = 0; i < w.size(); ++i)
    w(i) = rho2.weight(fit.t_hat(i) / fit.sigma2);
  return w;
}

DataMatrix impute(const DataMatrix& Z, const SubspaceFit& fit) {
  Matrix Zhat = fit.fitted();
  Matrix out = Zhat;
  for (Index j = 0; j < Z.cols(); ++j)
    for (Index i = 0; i < Z.rows(); ++i)
      if (Z.observed(i, j))
        out(i, j) = Zhat(i, j) + fit.W_cell(i, j) * fit.R(i, j);
  return DataMatrix(std::move(out));
}

SubspaceFit fit_subspace(const DataMatrix& Z, Index k,
                         const CellPcaOptions& options) {
  const Index n = Z.rows(), p = Z.cols();
  if (k < 1 || k >= std::min(n, p))
    throw Error("fit_subspace: rank must satisfy 1 <= k < min(n, p)");
  for (Index i = 0; i < n; ++i)
    if (Z.observed_in_row(i) == 0)
      throw EmptyRow("fit_subspace: row " + std::to_string(i) +
                     " has no observed cells");
  for (Index j = 0; j < p; ++j)
    if (Z.observed_in_col(j) == 0)
      throw Error("fit_subspace: column " + std::to_string(j) +
                  " has no observed cells");

  const RhoFunction& rho1 = options.rho1;
  const RhoFunction& rho2 = options.rho2;

  // --- initialization ---------------------------------------------------
  Vector med(p);
  for (Index j = 0; j < p; ++j) {
    std::vector<double> col;
    for (Index i = 0; i < n; ++i)
      if (Z.observed(i, j)) col.push_back(Z.values(i, j));
    med(j) = median(std::move(col));
  }

  // Hide univariately outlying cells from the initializer only (tanh mode).
  Mask init_mask = Z.mask;
  if (rho1.bounded()) {
    for (Index j = 0; j < p; ++j) {
      std::vector<double> dev;
      for (Index i = 0; i < n; ++i)
        if (Z.observed(i, j)) dev.push_back(Z.values(i, j) - med(j));
      double s;
      try {
        s = m_scale(dev, rho1);
      } catch (const DegenerateScale&) {
        continue;  // cannot flag against a degenerate scale
      }
      for (Index i = 0; i < n; ++i)
        if (Z.observed(i, j) &&
            std::abs(Z.values(i, j) - med(j)) > rho1.params.c * s)
          init_mask(i, j) = 0;
    }
  }

  Matrix filled(n, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i)
      filled(i, j) =
          (init_mask(i, j) != 0 ? Z.values(i, j) : med(j)) - med(j);

  Eigen::BDCSVD<Matrix> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector mu = med;
  Matrix V = svd.matrixV().leftCols(k);
  Matrix U = svd.matrixU().leftCols(k) *
             svd.singularValues().head(k).asDiagonal();

  // --- frozen scales from the initial residuals --------------------------
  Vector sigma1(p);
  {
    WorkState w0 = compute_residuals(Z, mu, V, U, Vector::Ones(p), rho1);
    for (Index j = 0; j < p; ++j) {
      std::vector<double> col;
      for (Index i = 0; i < n; ++i)
        if (Z.observed(i, j)) col.push_back(w0.R(i, j));
      try {
        sigma1(j) = m_scale(col, rho1);
      } catch (const DegenerateScale& e) {
        throw DegenerateColumn("fit_subspace: residual scale of column " +
                                   std::to_string(j) + " is degenerate: " +
                                   e.what(),
                               j);
      }
    }
  }
  double sigma2;
  {
    WorkState w0 = compute_residuals(Z, mu, V, U, sigma1, rho1);
    std::vector<double> devs(w0.t_hat.data(), w0.t_hat.data() + n);
    try {
      sigma2 = m_scale(devs, rho2);
    } catch (const DegenerateScale& e) {
      throw DegenerateScale(std::string("fit_subspace: casewise deviation "
                                        "scale is degenerate: ") +
                            e.what());
    }
  }

  SubspaceFit fit;
  fit.sigma1 = sigma1;
  fit.sigma2 = sigma2;
  fit.M = Z.mask;

  std::vector<double> trace;
  {
    WorkState w = compute_residuals(Z, mu, V, U, sigma1, rho1);
    trace.push_back(objective_from(Z, w.t_hat, sigma2, rho2));
  }

  bool converged = false;
  for (int outer = 0; outer < options.max_outer; ++outer) {
    // (mu, V) update given U, with weights at the current iterate
    {
      WorkState w = compute_residuals(Z, mu, V, U, sigma1, rho1);
      Vector wc(n);
      for (Index i = 0; i < n; ++i)
        wc(i) = rho2.weight(w.t_hat(i) / sigma2);
#pragma omp parallel for schedule(static) num_threads(max_threads())
      for (Index j = 0; j < p; ++j) {
        Matrix A = Matrix::Zero(k + 1, k + 1);
        Vector rhs = Vector::Zero(k + 1);
        Vector d(k + 1);
        for (Index i = 0; i < n; ++i) {
          if (!Z.observed(i, j)) continue;
          double wij =
              wc(i) * rho1.weight(w.R(i, j) / sigma1(j));
          if (wij == 0.0) continue;
          d(0) = 1.0;
          d.tail(k) = U.row(i).transpose();
          A.noalias() += wij * d * d.transpose();
          rhs.noalias() += wij * Z.values(i, j) * d;
        }
        if (!(A.trace() > 0.0)) continue;  // fully downweighted column
        Vector sol = solve_psd(std::move(A), rhs);
        mu(j) = sol(0);
        V.row(j) = sol.tail(k).transpose();
      }
    }

    // U update given (mu, V); weights refresh inside the row solver
    {
      bool failed = false;
      std::string msg;
#pragma omp parallel for schedule(static) num_threads(max_threads())
      for (Index i = 0; i < n; ++i) {
        try {
          Vector warm = U.row(i).transpose();
          Vector z_i = Z.values.row(i).transpose();
          MaskCol m_i = Z.mask.row(i).transpose();
          U.row(i) = solve_scores(z_i, m_i, mu, V, sigma1, sigma2, rho1, rho2,
                                  options, &warm)
                         .transpose();
        } catch (const std::exception& e) {
#pragma omp critical
          {
            failed = true;
            msg = e.what();
          }
        }
      }
      if (failed) throw RankDeficient(msg);
    }

    WorkState w = compute_residuals(Z, mu, V, U, sigma1, rho1);
    double L = objective_from(Z, w.t_hat, sigma2, rho2);
    double prev = trace.back();
    trace.push_back(L);
    if (prev - L < options.tol * std::max(prev, 1e-300)) {
      converged = true;
      break;
    }
  }

  // --- finalization: orthonormal basis for span(V) ------------------------
  {
    Eigen::HouseholderQR<Matrix> qr(V);
    Matrix Q = qr.householderQ() * Matrix::Identity(p, k);
    Matrix Rfac = Q.transpose() * V;  // upper triangular up to signs
    V = Q;
    U = (U * Rfac.transpose()).eval();
  }

  WorkState w = compute_residuals(Z, mu, V, U, sigma1, rho1);
  fit.mu = std::move(mu);
  fit.V = std::move(V);
  fit.U = std::move(U);
  fit.R = std::move(w.R);
  fit.t_hat = std::move(w.t_hat);
  fit.W_cell = cell_weights(fit.R, fit.sigma1, rho1);
  fit.w_case = Vector(n);
  for (Index i = 0; i < n; ++i)
    fit.w_case(i) = rho2.weight(fit.t_hat(i) / fit.sigma2);
  fit.objective_trace = std::move(trace);
  fit.converged = converged;

  if (!converged && options.require_convergence)
    throw NoConvergence("fit_subspace: no convergence within max_outer sweeps",
                        fit.objective_trace);
  return fit;
}

}  // namespace rcov
