#pragma once

#include "rcov/cellpca.hpp"
#include "rcov/mcd.hpp"
#include "rcov/mscale.hpp"
#include "rcov/rng.hpp"
#include "rcov/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace rcov {

std::vector<double> default_delta_grid();  // 0.05, 0.10, ..., 0.95, 1.0

struct CellRcovConfig {
  std::optional<Index> k;        // fixed rank; unset selects by parallel analysis
  std::optional<double> delta;   // fixed ridge; unset cross-validates;
                                 // 0 disables the ridge (oracle/test mode)
  double mcd_alpha = 0.75;
  // Score scatter: MCD (default) or the plain (1/n) sample covariance of the
  // scores; the latter exists for the classical-reduction oracle.
  enum class ScoreScatter { Mcd, Sample };
  ScoreScatter score_scatter = ScoreScatter::Mcd;
  CellPcaOptions pca{};
  std::uint64_t seed = kDefaultSeed;
  // parallel analysis
  Index pa_max_rank = 25;  // clamped to min(n, p) - 1
  int pa_references = 50;
  double pa_percentile = 95.0;
  // delta cross-validation
  std::vector<double> delta_grid = default_delta_grid();
  int cv_splits = 5;
};

struct RankSelection {
  Index chosen_k = 0;
  std::vector<double> observed_gaps;        // nu_{s-1} - nu_s for s = 1..
  std::vector<double> reference_quantiles;  // matching reference gap quantiles
  double percentile = 95.0;
  int n_reference = 0;
};

struct CovarianceEstimate {
  ScaleVector D;        // per-column scales and medians (data units)
  Matrix Sigma_sub;     // subspace part, standardized scale
  Matrix Sigma_perp;    // orthogonal part before regularization
  Matrix Sigma_perp_R;  // after the ridge
  Matrix Sigma_hat;     // D (Sigma_sub + Sigma_perp_R) D, data scale
  Vector center;        // data units
  Index rank_k = 0;
  double ridge_delta = 0.0;
  double b_norm = 0.0;
  SubspaceFit fit;
  std::optional<RankSelection> rank_selection;
};

// V * Scatter(U) * V^T; invariant to the basis chosen for span(V).
Matrix sigma_sub(const SubspaceFit& fit, const McdResult& mcd);

// Weighted covariance of the imputed residuals,
//   (1/b) sum_i w_case_i Wt_i r_i r_i^T Wt_i,  Wt = W_cell . M,
//   b = sum_i w_case_i (sum_j m_ij w_ij^cell)^2 / p^2.
// Throws DegenerateNormalizer when b <= 0.
std::pair<Matrix, double> sigma_perp(const SubspaceFit& fit);

// (1 - delta) S + delta diag(S); keeps the diagonal intact. delta in (0,1].
Matrix ridge_regularize(const Matrix& S, double delta);

// Parallel analysis on standardized data: the loss of the rank-s fit is
// compared rank by rank against the percentile of the same quantity on
// standard-Gaussian reference data fit by classical PCA; chosen_k counts the
// consecutive leading gaps that exceed their reference.
RankSelection select_rank(const DataMatrix& Z, const CellRcovConfig& config);

// H random splits into sizes floor(n/3) and the rest; picks the grid delta
// minimizing the mean Frobenius distance between the regularized estimate
// from subset 1 and the unregularized estimate from subset 2. Ties go to the
// larger delta. Failed splits are dropped; at least 2 must survive.
double select_delta(const DataMatrix& Z, Index k, const CellRcovConfig& config);

// Same cross-validation with a caller-supplied covariance estimator
// (used by the baseline estimators).
double select_delta_generic(
    const DataMatrix& X,
    const std::function<Matrix(const DataMatrix&)>& estimator,
    const std::vector<double>& grid, int splits, std::uint64_t seed);

// Full pipeline: standardize, fit the subspace, robust score scatter,
// weighted residual covariance, ridge, and undo the standardization.
CovarianceEstimate estimate(const DataMatrix& X,
                            const CellRcovConfig& config = {});

}  // namespace rcov
