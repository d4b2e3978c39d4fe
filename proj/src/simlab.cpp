#include "rcov/simlab.hpp"

#include "rcov/errors.hpp"
#include "rcov/kernels.hpp"
#include "rcov/metrics.hpp"
#include "rcov/threads.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <vector>

namespace rcov::sim {

SigmaModel sigma_model_from_string(const std::string& s) {
  if (s == "A09" || s == "a09") return SigmaModel::A09;
  if (s == "A06" || s == "a06") return SigmaModel::A06;
  if (s == "planar") return SigmaModel::Planar;
  if (s == "dense") return SigmaModel::Dense;
  throw InvalidSpec("unknown covariance model: " + s);
}

Contamination contamination_from_string(const std::string& s) {
  if (s == "none") return Contamination::None;
  if (s == "cellwise") return Contamination::Cellwise;
  if (s == "casewise") return Contamination::Casewise;
  if (s == "both") return Contamination::Both;
  throw InvalidSpec("unknown contamination scenario: " + s);
}

Estimator estimator_from_string(const std::string& s) {
  if (s == "cellrcov") return Estimator::CellRcov;
  if (s == "rcov") return Estimator::RCov;
  if (s == "spearman") return Estimator::Spearman;
  throw InvalidSpec("unknown estimator: " + s);
}

std::string to_string(SigmaModel m) {
  switch (m) {
    case SigmaModel::A09: return "A09";
    case SigmaModel::A06: return "A06";
    case SigmaModel::Planar: return "planar";
    case SigmaModel::Dense: return "dense";
  }
  return "?";
}

std::string to_string(Contamination c) {
  switch (c) {
    case Contamination::None: return "none";
    case Contamination::Cellwise: return "cellwise";
    case Contamination::Casewise: return "casewise";
    case Contamination::Both: return "both";
  }
  return "?";
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::CellRcov: return "cellrcov";
    case Estimator::RCov: return "rcov";
    case Estimator::Spearman: return "spearman";
  }
  return "?";
}

Matrix make_sigma(SigmaModel model, Index p) {
  if (p < 2) throw InvalidSpec("make_sigma: need p >= 2");
  Matrix S(p, p);
  switch (model) {
    case SigmaModel::A09:
    case SigmaModel::A06: {
      double base = model == SigmaModel::A09 ? -0.9 : -0.6;
      for (Index j = 0; j < p; ++j)
        for (Index l = 0; l < p; ++l)
          S(j, l) = std::pow(base, static_cast<double>(std::abs(j - l)));
      break;
    }
    case SigmaModel::Dense: {
      S.setConstant(0.8);
      S.diagonal().setOnes();
      break;
    }
    case SigmaModel::Planar: {
      // eigenvectors of A09; eigenvalues with shares 53% / 37% / tiny rest
      Matrix A = make_sigma(SigmaModel::A09, p);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
      // SelfAdjointEigenSolver sorts ascending; take descending order
      Matrix E = eig.eigenvectors().rowwise().reverse();
      double tiny = 0.01;
      double total = tiny * static_cast<double>(p - 2) / 0.1;
      Vector lambda = Vector::Constant(p, tiny);
      lambda(0) = 0.53 * total;
      lambda(1) = 0.37 * total;
      Matrix pre = E * lambda.asDiagonal() * E.transpose();
      Vector dinv = pre.diagonal().cwiseSqrt().cwiseInverse();
      S = dinv.asDiagonal() * pre * dinv.asDiagonal();
      S = 0.5 * (S + S.transpose());
      break;
    }
  }
  return S;
}

void ExperimentSpec::validate() const {
  if (p < 2 || n < 5) throw InvalidSpec("spec: need n >= 5 and p >= 2");
  if (replications < 1) throw InvalidSpec("spec: need replications >= 1");
  if (gamma < 0.0) throw InvalidSpec("spec: gamma must be >= 0");
  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(cell_rate) || !rate_ok(case_rate) || !rate_ok(na_rate))
    throw InvalidSpec("spec: rates must lie in [0, 1]");
  double cells = contamination == Contamination::Cellwise ||
                         contamination == Contamination::Both
                     ? cell_rate
                     : 0.0;
  if (cells + na_rate > 1.0)
    throw InvalidSpec("spec: cell_rate + na_rate must not exceed 1");
  if (estimators.empty()) throw InvalidSpec("spec: no estimators requested");
}

namespace {

Matrix gaussian_data(Index n, Index p, const Matrix& chol_lower, Rng& rng) {
  Matrix G(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) G(i, j) = rng.gaussian();
  return G * chol_lower.transpose();
}

}  // namespace

std::pair<Matrix, ContaminationTruth> contaminate(const Matrix& X,
                                                  const ExperimentSpec& spec,
                                                  Rng& rng) {
  const Index n = X.rows(), p = X.cols();
  Matrix out = X;
  ContaminationTruth truth;
  truth.cells = Mask::Zero(n, p);

  const bool do_cases = spec.contamination == Contamination::Casewise ||
                        spec.contamination == Contamination::Both;
  const bool do_cells = spec.contamination == Contamination::Cellwise ||
                        spec.contamination == Contamination::Both;

  std::vector<char> is_case_row(static_cast<std::size_t>(n), 0);
  if (do_cases) {
    auto n_cases = static_cast<std::size_t>(
        std::llround(spec.case_rate * static_cast<double>(n)));
    Matrix Sigma = make_sigma(spec.model, p);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Sigma);
    Vector e = eig.eigenvectors().col(0);  // smallest eigenvalue
    Vector w = Sigma.llt().solve(e);
    double denom = std::sqrt(e.dot(w));  // sqrt(e^T Sigma^-1 e)
    Vector shift =
        spec.gamma * std::sqrt(static_cast<double>(p)) / denom * e;
    Matrix L = Sigma.llt().matrixL();
    std::vector<std::size_t> rows = rng.sample_without_replacement(
        static_cast<std::size_t>(n), n_cases);
    std::sort(rows.begin(), rows.end());
    for (std::size_t r : rows) {
      Vector g(p);
      for (Index j = 0; j < p; ++j) g(j) = rng.gaussian();
      out.row(static_cast<Index>(r)) = (shift + L * g).transpose();
      is_case_row[r] = 1;
      truth.cases.push_back(static_cast<Index>(r));
    }
  }

  if (do_cells && spec.gamma != 0.0) {
    std::vector<std::size_t> allowed;
    allowed.reserve(static_cast<std::size_t>(n * p));
    for (Index i = 0; i < n; ++i) {
      if (is_case_row[static_cast<std::size_t>(i)]) continue;
      for (Index j = 0; j < p; ++j)
        allowed.push_back(static_cast<std::size_t>(i * p + j));
    }
    auto n_cells = static_cast<std::size_t>(
        std::llround(spec.cell_rate * static_cast<double>(n * p)));
    if (n_cells > allowed.size())
      throw InvalidSpec("contaminate: not enough cells outside case rows");
    std::vector<std::size_t> pick =
        rng.sample_without_replacement(allowed.size(), n_cells);
    for (std::size_t t : pick) {
      std::size_t flat = allowed[t];
      Index i = static_cast<Index>(flat) / p;
      Index j = static_cast<Index>(flat) % p;
      out(i, j) = spec.gamma;
      truth.cells(i, j) = 1;
    }
  }
  return {std::move(out), std::move(truth)};
}

DataMatrix inject_na(const Matrix& X, double na_rate, Rng& rng,
                     const Mask* forbidden) {
  const Index n = X.rows(), p = X.cols();
  auto count = static_cast<std::size_t>(
      std::llround(na_rate * static_cast<double>(n * p)));
  DataMatrix out(X);
  if (count == 0) return out;

  std::vector<std::size_t> allowed;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j)
      if (forbidden == nullptr || (*forbidden)(i, j) == 0)
        allowed.push_back(static_cast<std::size_t>(i * p + j));
  if (count > allowed.size())
    throw InfeasibleNaRate("inject_na: not enough unconstrained cells");

  for (int attempt = 0; attempt < 100; ++attempt) {
    Mask mask = Mask::Ones(n, p);
    std::vector<std::size_t> pick =
        rng.sample_without_replacement(allowed.size(), count);
    for (std::size_t t : pick) {
      std::size_t flat = allowed[t];
      mask(static_cast<Index>(flat) / p, static_cast<Index>(flat) % p) = 0;
    }
    bool feasible = true;
    for (Index i = 0; i < n && feasible; ++i)
      if (mask.row(i).cast<int>().sum() == 0) feasible = false;
    for (Index j = 0; j < p && feasible; ++j)
      if (mask.col(j).cast<int>().sum() == 0) feasible = false;
    if (feasible) {
      out.mask = std::move(mask);
      return out;
    }
  }
  throw InfeasibleNaRate(
      "inject_na: could not satisfy the row/column coverage constraint in "
      "100 attempts");
}

CovarianceEstimate baseline_rcov(const DataMatrix& X,
                                 const CellRcovConfig& config) {
  CovarianceEstimate out;
  Vector means;
  Matrix S = kernels::pairwise_complete_covariance(X, &means);
  auto estimator = [](const DataMatrix& sub) {
    return kernels::pairwise_complete_covariance(sub);
  };
  double delta = config.delta.has_value()
                     ? *config.delta
                     : select_delta_generic(X, estimator, config.delta_grid,
                                            config.cv_splits, config.seed);
  out.D.values = Vector::Ones(X.cols());
  out.D.centers = means;
  out.Sigma_sub = Matrix::Zero(X.cols(), X.cols());
  out.Sigma_perp = S;
  out.Sigma_perp_R = delta == 0.0 ? S : ridge_regularize(S, delta);
  out.Sigma_hat = out.Sigma_perp_R;
  out.center = means;
  out.rank_k = 0;
  out.ridge_delta = delta;
  return out;
}

CovarianceEstimate baseline_spearman(const DataMatrix& X,
                                     const CellRcovConfig& config) {
  const RhoFunction rho = config.pca.rho1;
  auto build = [&rho](const DataMatrix& sub) -> Matrix {
    Matrix R = kernels::pairwise_spearman(sub);
    // Gaussian rank-to-linear correlation map, then scale by M-scales
    for (Index j = 0; j < R.cols(); ++j)
      for (Index i = 0; i < R.rows(); ++i)
        if (i != j)
          R(i, j) = 2.0 * std::sin(std::numbers::pi * R(i, j) / 6.0);
    ScaleVector sc = column_scales(sub, rho);
    return sc.values.asDiagonal() * R * sc.values.asDiagonal();
  };

  CovarianceEstimate out;
  Matrix S = build(X);
  double delta = config.delta.has_value()
                     ? *config.delta
                     : select_delta_generic(X, build, config.delta_grid,
                                            config.cv_splits, config.seed);
  ScaleVector sc = column_scales(X, config.pca.rho1);
  out.D = sc;
  out.Sigma_sub = Matrix::Zero(X.cols(), X.cols());
  out.Sigma_perp = S;
  out.Sigma_perp_R = delta == 0.0 ? S : ridge_regularize(S, delta);
  out.Sigma_hat = out.Sigma_perp_R;
  out.center = sc.centers;
  out.rank_k = 0;
  out.ridge_delta = delta;
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult result;
  result.spec = spec;

  Matrix Sigma = make_sigma(spec.model, spec.p);
  Matrix L = Sigma.llt().matrixL();

  const int R = spec.replications;
  const auto n_est = spec.estimators.size();
  // kl[e][r]: NaN marks a failed replication
  std::vector<std::vector<double>> kl(
      n_est, std::vector<double>(static_cast<std::size_t>(R),
                                 std::numeric_limits<double>::quiet_NaN()));
  std::vector<double> wall(n_est, 0.0);

  Rng root(spec.seed);
#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
  for (int r = 0; r < R; ++r) {
    Rng rng = root.stream(static_cast<std::uint64_t>(r));
    Matrix X = gaussian_data(spec.n, spec.p, L, rng);
    DataMatrix data;
    try {
      auto pair = contaminate(X, spec, rng);
      if (spec.na_rate > 0.0) {
        Rng na_rng = rng.stream(0x4E);
        data = inject_na(pair.first, spec.na_rate, na_rng, &pair.second.cells);
      } else {
        data = DataMatrix(std::move(pair.first));
      }
    } catch (const std::exception&) {
      continue;  // counted as failure for every estimator
    }

    for (std::size_t e = 0; e < n_est; ++e) {
      auto t0 = std::chrono::steady_clock::now();
      try {
        CellRcovConfig cfg = spec.rcov;
        cfg.seed = rng.stream(0xE5 + e).next_u64();
        CovarianceEstimate est;
        switch (spec.estimators[e]) {
          case Estimator::CellRcov: est = estimate(data, cfg); break;
          case Estimator::RCov: est = baseline_rcov(data, cfg); break;
          case Estimator::Spearman: est = baseline_spearman(data, cfg); break;
        }
        double v = kl_discrepancy(est.Sigma_hat, Sigma);
        if (!std::isfinite(v)) throw Error("non-finite KL");
        kl[e][static_cast<std::size_t>(r)] = v;
      } catch (const std::exception&) {
        // failure recorded through the NaN marker
      }
      auto t1 = std::chrono::steady_clock::now();
#pragma omp atomic
      wall[e] += std::chrono::duration<double>(t1 - t0).count();
    }
  }

  for (std::size_t e = 0; e < n_est; ++e) {
    EstimatorOutcome o;
    o.estimator = spec.estimators[e];
    for (double v : kl[e])
      if (std::isfinite(v))
        o.kls.push_back(v);
      else
        ++o.failures;
    if (!o.kls.empty()) {
      double mean = 0.0;
      for (double v : o.kls) mean += v;
      mean /= static_cast<double>(o.kls.size());
      double var = 0.0;
      for (double v : o.kls) var += (v - mean) * (v - mean);
      o.mean_kl = mean;
      o.se = o.kls.size() > 1
                 ? std::sqrt(var / static_cast<double>(o.kls.size() - 1) /
                             static_cast<double>(o.kls.size()))
                 : 0.0;
    } else {
      o.mean_kl = std::numeric_limits<double>::quiet_NaN();
      o.se = std::numeric_limits<double>::quiet_NaN();
    }
    o.wall_seconds = wall[e];
    result.outcomes.push_back(std::move(o));
  }
  return result;
}

std::string csv_header() {
  return "model,p,n,scenario,gamma,estimator,mean_kl,se,failures";
}

std::vector<std::string> to_csv_rows(const ExperimentResult& result) {
  std::vector<std::string> rows;
  char buf[256];
  for (const auto& o : result.outcomes) {
    std::snprintf(buf, sizeof(buf), "%s,%lld,%lld,%s,%.17g,%s,%.17g,%.17g,%d",
                  to_string(result.spec.model).c_str(),
                  static_cast<long long>(result.spec.p),
                  static_cast<long long>(result.spec.n),
                  to_string(result.spec.contamination).c_str(),
                  result.spec.gamma, to_string(o.estimator).c_str(), o.mean_kl,
                  o.se, o.failures);
    rows.emplace_back(buf);
  }
  return rows;
}

}  // namespace rcov::sim
