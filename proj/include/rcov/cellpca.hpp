#pragma once

#include "rcov/mscale.hpp"
#include "rcov/rho.hpp"
#include "rcov/types.hpp"

#include <vector>

namespace rcov {

struct CellPcaOptions {
  RhoFunction rho1 = RhoFunction::tanh_default();  // cellwise loss
  RhoFunction rho2 = RhoFunction::tanh_default();  // casewise loss
  int max_outer = 100;
  double tol = 1e-9;  // relative objective decrease
  int max_inner = 50;
  double inner_tol = 1e-8;  // first-order-condition residual norm
  // When true, hitting max_outer without meeting tol throws NoConvergence
  // (carrying the objective trace). Otherwise the best iterate is returned
  // with converged = false.
  bool require_convergence = false;
};

// Rank-k robust subspace fit of standardized data: Z ~ 1 mu^T + U V^T.
// Residual scales sigma1/sigma2 are frozen from the initial fit.
struct SubspaceFit {
  Vector mu;      // p
  Matrix V;       // p x k, orthonormal columns after finalization
  Matrix U;       // n x k scores
  Vector sigma1;  // p cellwise residual scales
  double sigma2 = 0.0;  // casewise deviation scale
  Vector t_hat;   // n casewise total deviations at the final fit
  Matrix R;       // n x p residuals; exactly 0 at masked cells
  Matrix W_cell;  // n x p cellwise weights in [0,1]; 1 at masked cells
  Vector w_case;  // n casewise weights in [0,1]
  Mask M;         // missingness of the training data
  std::vector<double> objective_trace;  // initial loss + one value per sweep
  bool converged = false;

  Index rank() const { return V.cols(); }

  // 1 mu^T + U V^T
  Matrix fitted() const;
};

// Casewise total deviation of one row:
//   t = sqrt( (1/m) sum_j mask_j sigma1_j^2 rho1(r_j / sigma1_j) )
// with m the number of observed cells. Throws EmptyRow when m = 0.
double total_deviation(const Vector& residuals,
                       const Eigen::Ref<const Eigen::Matrix<std::uint8_t,
                                                            Eigen::Dynamic, 1>>& mask,
                       const Vector& sigma1, const RhoFunction& rho1);

// The doubly robust loss
//   L = (sigma2^2 / m) * sum_i m_i rho2(t_i / sigma2)
// recomputed from (Z, fit.mu, fit.U, fit.V) on observed cells. With
// quadratic rho1 = rho2 and complete data this is (1/(np)) sum r_ij^2.
double loss(const DataMatrix& Z, const SubspaceFit& fit,
            const RhoFunction& rho1, const RhoFunction& rho2);

// Score vector of one row: minimizes the row term of the loss via inner
// IRLS on the observed coordinates; at convergence satisfies
//   (V^T W V) u = V^T W (z - mu)
// with the weights evaluated at u. The casewise weight is constant within a
// row and cancels from this equation, so sigma2/rho2 do not enter; they are
// accepted to mirror the loss signature. Throws RankDeficient when V
// restricted to the observed coordinates has rank < k.
Vector solve_scores(const Vector& z_row,
                    const Eigen::Ref<const Eigen::Matrix<std::uint8_t,
                                                         Eigen::Dynamic, 1>>& mask,
                    const Vector& mu, const Matrix& V, const Vector& sigma1,
                    double sigma2, const RhoFunction& rho1,
                    const RhoFunction& rho2, const CellPcaOptions& options,
                    const Vector* warm_start = nullptr);

// Elementwise cellwise weights psi1(r/sigma1)/(r/sigma1), with weight(0) = 1.
Matrix cell_weights(const Matrix& R, const Vector& sigma1,
                    const RhoFunction& rho1);

// Casewise weights psi2(t/sigma2)/(t/sigma2) from the fit's stored total
// deviations.
Vector case_weights(const SubspaceFit& fit, const RhoFunction& rho2);

// Z_imp = Zhat + (W_cell . M) . R : missing cells become fitted values,
// outlying cells are shrunk toward the fit, clean cells pass through.
// The result is fully observed.
DataMatrix impute(const DataMatrix& Z, const SubspaceFit& fit);

// Alternating IRLS fit. Initialization: univariately outlying cells are
// hidden, remaining holes are filled with column medians, and a truncated
// SVD of the median-centered filled matrix provides (mu, V, U). Scales are
// then frozen and (mu,V) | U and U | (mu,V) weighted least-squares sweeps
// run until the relative objective decrease drops below options.tol.
SubspaceFit fit_subspace(const DataMatrix& Z, Index k,
                         const CellPcaOptions& options = {});

}  // namespace rcov
