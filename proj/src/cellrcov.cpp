#include "rcov/cellrcov.hpp"

#include "rcov/errors.hpp"
#include "rcov/kernels.hpp"
#include "rcov/threads.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rcov {

std::vector<double> default_delta_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
  g.push_back(1.0);
  return g;
}

Matrix sigma_sub(const SubspaceFit& fit, const McdResult& mcd) {
  return fit.V * mcd.scatter * fit.V.transpose();
}

std::pair<Matrix, double> sigma_perp(const SubspaceFit& fit) {
  const Index n = fit.R.rows(), p = fit.R.cols();
  // row-scaled weighted residuals: G_i = sqrt(w_case_i) * Wt_i . r_i
  Matrix G(n, p);
  double b = 0.0;
  for (Index i = 0; i < n; ++i) {
    double row_weight_sum = 0.0;
    double sw = std::sqrt(fit.w_case(i));
    for (Index j = 0; j < p; ++j) {
      double wt = fit.M(i, j) != 0 ? fit.W_cell(i, j) : 0.0;
      G(i, j) = sw * wt * fit.R(i, j);
      row_weight_sum += wt;
    }
    b += fit.w_case(i) * (row_weight_sum / static_cast<double>(p)) *
         (row_weight_sum / static_cast<double>(p));
  }
  if (!(b > 0.0))
    throw DegenerateNormalizer(
        "sigma_perp: all cases are fully downweighted (b <= 0)");
  Matrix S = kernels::crossprod(G) / b;
  return {std::move(S), b};
}

Matrix ridge_regularize(const Matrix& S, double delta) {
  if (!(delta > 0.0) || !(delta <= 1.0))
    throw InvalidDelta("ridge_regularize: delta must lie in (0, 1]");
  if (S.rows() != S.cols())
    throw DimensionMismatch("ridge_regularize: matrix is not square");
  Matrix out = (1.0 - delta) * S;
  out.diagonal() = S.diagonal();
  return out;
}

namespace {

// Eq-7-style objective of an arbitrary residual matrix: per-column M-scales,
// casewise deviations, casewise M-scale, then the loss itself. Used by the
// parallel-analysis rank sweep for both the rank-0 fits and the classical
// reference fits.
double objective_of_residuals(const Matrix& R, const Mask& M,
                              const RhoFunction& rho1,
                              const RhoFunction& rho2) {
  const Index n = R.rows(), p = R.cols();
  Vector sigma1(p);
  for (Index j = 0; j < p; ++j) {
    std::vector<double> col;
    col.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      if (M(i, j) != 0) col.push_back(R(i, j));
    sigma1(j) = m_scale(col, rho1);
  }
  Vector t_hat(n);
  double m_total = 0.0;
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    Index m_i = 0;
    for (Index j = 0; j < p; ++j) {
      if (M(i, j) == 0) continue;
      acc += sigma1(j) * sigma1(j) * rho1.rho(R(i, j) / sigma1(j));
      ++m_i;
    }
    if (m_i == 0) throw EmptyRow("objective: empty row");
    t_hat(i) = std::sqrt(acc / static_cast<double>(m_i));
    m_total += static_cast<double>(m_i);
  }
  std::vector<double> devs(t_hat.data(), t_hat.data() + n);
  double sigma2 = m_scale(devs, rho2);
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    double m_i = 0.0;
    for (Index j = 0; j < p; ++j) m_i += M(i, j) != 0 ? 1.0 : 0.0;
    acc += m_i * rho2.rho(t_hat(i) / sigma2);
  }
  return sigma2 * sigma2 * acc / m_total;
}

// Residuals of Z against the per-column medians (the rank-0 "fit").
Matrix median_residuals(const DataMatrix& Z) {
  Matrix R = Matrix::Zero(Z.rows(), Z.cols());
  for (Index j = 0; j < Z.cols(); ++j) {
    std::vector<double> col;
    for (Index i = 0; i < Z.rows(); ++i)
      if (Z.observed(i, j)) col.push_back(Z.values(i, j));
    double m = median(std::move(col));
    for (Index i = 0; i < Z.rows(); ++i)
      if (Z.observed(i, j)) R(i, j) = Z.values(i, j) - m;
  }
  return R;
}

// One standard-Gaussian reference dataset: classical PCA residuals at every
// rank come from a single SVD of the column-mean-centered draw.
struct ReferenceFit {
  Matrix centered;  // n x p, column-mean centered
  Matrix U, V;      // thin SVD factors
  Vector svals;
  Vector col_means;
  Vector col_medians;
  Matrix residuals_at(Index s) const {
    if (s == 0) {
      // rank 0 uses median-centered residuals, matching the real-data nu_0
      Matrix R = centered;
      R.rowwise() += (col_means - col_medians).transpose();
      return R;
    }
    return centered - U.leftCols(s) * svals.head(s).asDiagonal() *
                          V.leftCols(s).transpose();
  }
};

ReferenceFit make_reference(Index n, Index p, Rng rng) {
  Matrix Y(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) Y(i, j) = rng.gaussian();
  ReferenceFit ref;
  ref.col_means = Y.colwise().mean().transpose();
  ref.centered = Y.rowwise() - ref.col_means.transpose();
  Eigen::BDCSVD<Matrix> svd(ref.centered,
                            Eigen::ComputeThinU | Eigen::ComputeThinV);
  ref.U = svd.matrixU();
  ref.V = svd.matrixV();
  ref.svals = svd.singularValues();
  ref.col_medians.resize(p);
  for (Index j = 0; j < p; ++j) {
    std::vector<double> col(Y.col(j).data(), Y.col(j).data() + n);
    ref.col_medians(j) = median(std::move(col));
  }
  return ref;
}

double percentile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double idx = q / 100.0 * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(idx));
  auto hi = static_cast<std::size_t>(std::ceil(idx));
  double t = idx - static_cast<double>(lo);
  return v[lo] * (1.0 - t) + v[hi] * t;
}

}  // namespace

RankSelection select_rank(const DataMatrix& Z, const CellRcovConfig& config) {
  const Index n = Z.rows(), p = Z.cols();
  const Index k_max =
      std::min(config.pa_max_rank, std::min(n, p) - 1);
  if (k_max < 1) throw Error("select_rank: max rank must be >= 1");
  const int B = config.pa_references;
  if (B < 2) throw Error("select_rank: need at least 2 reference datasets");
  const RhoFunction& rho1 = config.pca.rho1;
  const RhoFunction& rho2 = config.pca.rho2;

  // reference datasets (complete, standard normal, same shape)
  Rng root(config.seed);
  std::vector<ReferenceFit> refs(static_cast<std::size_t>(B));
#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
  for (int b = 0; b < B; ++b)
    refs[static_cast<std::size_t>(b)] =
        make_reference(n, p, root.stream(0x9A11E7 + static_cast<std::uint64_t>(b)));

  const Mask full = Mask::Ones(n, p);
  std::vector<Vector> ref_nu(static_cast<std::size_t>(B));  // lazily extended
  auto ref_objective = [&](int b, Index s) -> double {
    Vector& cache = ref_nu[static_cast<std::size_t>(b)];
    if (cache.size() == 0) {
      cache = Vector::Constant(k_max + 1, -1.0);
    }
    if (cache(s) < 0.0)
      cache(s) = objective_of_residuals(
          refs[static_cast<std::size_t>(b)].residuals_at(s), full, rho1, rho2);
    return cache(s);
  };

  RankSelection sel;
  sel.percentile = config.pa_percentile;
  sel.n_reference = B;

  double nu_prev =
      objective_of_residuals(median_residuals(Z), Z.mask, rho1, rho2);
  Index chosen = k_max;
  for (Index s = 1; s <= k_max; ++s) {
    double nu_s;
    try {
      SubspaceFit fit = fit_subspace(Z, s, config.pca);
      nu_s = fit.objective_trace.back();
    } catch (const Error&) {
      chosen = s - 1;  // a rank that cannot be fit cannot be selected
      break;
    }
    double gap = nu_prev - nu_s;

    std::vector<double> ref_gaps(static_cast<std::size_t>(B));
    bool ref_failed = false;
#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
    for (int b = 0; b < B; ++b) {
      try {
        ref_gaps[static_cast<std::size_t>(b)] =
            ref_objective(b, s - 1) - ref_objective(b, s);
      } catch (const std::exception&) {
#pragma omp critical
        ref_failed = true;
      }
    }
    if (ref_failed)
      throw Error("select_rank: reference objective failed at rank " +
                  std::to_string(s));
    double threshold = percentile_of(ref_gaps, config.pa_percentile);

    sel.observed_gaps.push_back(gap);
    sel.reference_quantiles.push_back(threshold);
    if (!(gap > threshold)) {
      chosen = s - 1;
      break;
    }
    nu_prev = nu_s;
  }
  sel.chosen_k = chosen;
  return sel;
}

namespace {

DataMatrix take_rows(const DataMatrix& X, const std::vector<std::size_t>& rows) {
  DataMatrix out;
  out.values.resize(static_cast<Index>(rows.size()), X.cols());
  out.mask.resize(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    out.values.row(static_cast<Index>(t)) =
        X.values.row(static_cast<Index>(rows[t]));
    out.mask.row(static_cast<Index>(t)) =
        X.mask.row(static_cast<Index>(rows[t]));
  }
  return out;
}

}  // namespace

double select_delta_generic(
    const DataMatrix& X,
    const std::function<Matrix(const DataMatrix&)>& estimator,
    const std::vector<double>& grid, int splits, std::uint64_t seed) {
  if (grid.empty()) throw Error("select_delta: empty candidate grid");
  if (splits < 2) throw Error("select_delta: need at least 2 splits");
  const auto n = static_cast<std::size_t>(X.rows());
  const std::size_t n1 = n / 3;
  if (n1 < 2) throw Error("select_delta: sample too small to split");

  Rng root(seed);
  std::vector<std::pair<Matrix, Matrix>> pairs(
      static_cast<std::size_t>(splits));
  std::vector<char> ok(static_cast<std::size_t>(splits), 0);

#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
  for (int h = 0; h < splits; ++h) {
    try {
      Rng rng = root.stream(0xDE17A + static_cast<std::uint64_t>(h));
      std::vector<std::size_t> first =
          rng.sample_without_replacement(n, n1);
      std::vector<char> in_first(n, 0);
      for (std::size_t i : first) in_first[i] = 1;
      std::vector<std::size_t> second;
      for (std::size_t i = 0; i < n; ++i)
        if (!in_first[i]) second.push_back(i);
      std::sort(first.begin(), first.end());
      Matrix S1 = estimator(take_rows(X, first));
      Matrix S2 = estimator(take_rows(X, second));
      pairs[static_cast<std::size_t>(h)] = {std::move(S1), std::move(S2)};
      ok[static_cast<std::size_t>(h)] = 1;
    } catch (const std::exception&) {
      // failed split: dropped
    }
  }

  int surviving = 0;
  for (char c : ok) surviving += c;
  if (surviving < 2)
    throw Error("select_delta: fewer than 2 splits survived");

  std::vector<double> sorted_grid = grid;
  std::sort(sorted_grid.begin(), sorted_grid.end());
  double best_delta = sorted_grid.front();
  double best_loss = std::numeric_limits<double>::infinity();
  for (double delta : sorted_grid) {
    double acc = 0.0;
    for (int h = 0; h < splits; ++h) {
      if (!ok[static_cast<std::size_t>(h)]) continue;
      acc += (ridge_regularize(pairs[static_cast<std::size_t>(h)].first,
                               delta) -
              pairs[static_cast<std::size_t>(h)].second)
                 .norm();
    }
    acc /= static_cast<double>(surviving);
    if (acc <= best_loss) {  // ties break toward the larger delta
      best_loss = acc;
      best_delta = delta;
    }
  }
  return best_delta;
}

double select_delta(const DataMatrix& Z, Index k,
                    const CellRcovConfig& config) {
  auto perp_estimator = [&](const DataMatrix& sub) -> Matrix {
    SubspaceFit fit = fit_subspace(sub, k, config.pca);
    return sigma_perp(fit).first;
  };
  return select_delta_generic(Z, perp_estimator, config.delta_grid,
                              config.cv_splits, config.seed);
}

CovarianceEstimate estimate(const DataMatrix& X,
                            const CellRcovConfig& config) {
  const Index n = X.rows(), p = X.cols();
  if (n < 5 || p < 2)
    throw InvalidSpec("estimate: need at least 5 cases and 2 variables");

  CovarianceEstimate out;

  DataMatrix Z;
  try {
    auto std_pair = robust_standardize(X, config.pca.rho1);
    Z = std::move(std_pair.first);
    out.D = std::move(std_pair.second);
  } catch (const Error& e) {
    throw StageError("standardize", e.what());
  }

  Index k;
  if (config.k.has_value()) {
    k = *config.k;
    if (k < 1 || k >= std::min(n, p))
      throw StageError("rank", "k must satisfy 1 <= k < min(n, p)");
  } else {
    try {
      RankSelection sel = select_rank(Z, config);
      out.rank_selection = sel;
      k = std::max<Index>(sel.chosen_k, 1);  // the pipeline needs a subspace
    } catch (const Error& e) {
      throw StageError("rank", e.what());
    }
  }
  out.rank_k = k;

  try {
    out.fit = fit_subspace(Z, k, config.pca);
  } catch (const Error& e) {
    throw StageError("subspace", e.what());
  }

  try {
    if (config.score_scatter == CellRcovConfig::ScoreScatter::Mcd) {
      McdResult mcd = mcd_estimate(out.fit.U, config.mcd_alpha);
      out.Sigma_sub = sigma_sub(out.fit, mcd);
    } else {
      // (1/n) centered sample covariance of the scores
      Vector mean = out.fit.U.colwise().mean().transpose();
      Matrix C = out.fit.U.rowwise() - mean.transpose();
      McdResult plain;
      plain.location = mean;
      plain.scatter = (C.transpose() * C) / static_cast<double>(n);
      out.Sigma_sub = sigma_sub(out.fit, plain);
    }
  } catch (const Error& e) {
    throw StageError("scores", e.what());
  }

  try {
    auto perp = sigma_perp(out.fit);
    out.Sigma_perp = std::move(perp.first);
    out.b_norm = perp.second;
  } catch (const Error& e) {
    throw StageError("sigma_perp", e.what());
  }

  try {
    out.ridge_delta =
        config.delta.has_value() ? *config.delta : select_delta(Z, k, config);
    if (out.ridge_delta == 0.0)
      out.Sigma_perp_R = out.Sigma_perp;  // explicit opt-out
    else
      out.Sigma_perp_R = ridge_regularize(out.Sigma_perp, out.ridge_delta);
  } catch (const Error& e) {
    throw StageError("ridge", e.what());
  }

  Matrix Sz = out.Sigma_sub + out.Sigma_perp_R;
  const Vector& d = out.D.values;
  out.Sigma_hat = d.asDiagonal() * Sz * d.asDiagonal();
  out.Sigma_hat = (0.5 * (out.Sigma_hat + out.Sigma_hat.transpose())).eval();
  out.center = d.cwiseProduct(out.fit.mu);
  return out;
}

}  // namespace rcov
