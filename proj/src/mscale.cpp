#include "rcov/mscale.hpp"

#include "rcov/errors.hpp"
#include "rcov/threads.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rcov {

double median(std::vector<double> v) {
  if (v.empty()) throw Error("median of empty sample");
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  double med = v[mid];
  if (n % 2 == 0) {
    double lower = *std::max_element(
        v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (med + lower);
  }
  return med;
}

namespace {

double mean_rho(const std::vector<double>& t, double sigma,
                const RhoFunction& rho) {
  const double inv = 1.0 / (rho.consistency() * sigma);
  double s = 0.0;
  for (double x : t) s += rho.rho(x * inv);
  return s / static_cast<double>(t.size());
}

}  // namespace

double m_scale(std::span<const double> sample, const RhoFunction& rho) {
  std::vector<double> t;
  t.reserve(sample.size());
  std::size_t zeros = 0;
  for (double x : sample) {
    if (!std::isfinite(x)) continue;  // missing marker
    t.push_back(x);
    if (x == 0.0) ++zeros;
  }
  if (t.empty()) throw DegenerateScale("m_scale: no observed entries");
  if (rho.bounded() && 2 * zeros >= t.size())
    throw DegenerateScale(
        "m_scale: at least half of the entries are exactly zero");

  // Quadratic mode: mean rho((t / sigma)^2) = 1 has the closed-form root.
  if (!rho.bounded()) {
    double ss = 0.0;
    for (double x : t) ss += x * x;
    double rms = std::sqrt(ss / static_cast<double>(t.size()));
    if (rms == 0.0) throw DegenerateScale("m_scale: all entries zero");
    return rms;
  }

  const double target = rho.mscale_target();

  // g(sigma) = mean rho - target is decreasing in sigma. Seed the bracket
  // from the median absolute value, which is exactly scale-equivariant.
  std::vector<double> abs_t(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) abs_t[i] = std::abs(t[i]);
  double seed = median(std::move(abs_t));
  if (seed == 0.0) {
    // fewer than half zeros, but the median |t| still vanished: fall back to
    // the largest magnitude
    for (double x : t) seed = std::max(seed, std::abs(x));
  }

  double lo = seed, hi = seed;
  int guard = 0;
  while (mean_rho(t, lo, rho) < target && guard++ < 2000) lo *= 0.5;
  if (guard >= 2000) throw DegenerateScale("m_scale: no positive root");
  guard = 0;
  while (mean_rho(t, hi, rho) > target && guard++ < 2000) hi *= 2.0;
  if (guard >= 2000) throw DegenerateScale("m_scale: equation does not drop");

  // bisection on log sigma to ~1e-6, then Newton
  for (int i = 0; i < 40 && hi / lo - 1.0 > 1e-6; ++i) {
    double mid = std::sqrt(lo * hi);
    if (mean_rho(t, mid, rho) > target)
      lo = mid;
    else
      hi = mid;
  }
  double sigma = std::sqrt(lo * hi);
  const double a = rho.consistency();
  for (int i = 0; i < 60; ++i) {
    double g = mean_rho(t, sigma, rho) - target;
    // g'(sigma) = -mean[ psi(u) * u ] / sigma with u = t / (a sigma)
    double dg = 0.0;
    const double inv = 1.0 / (a * sigma);
    for (double x : t) {
      double u = x * inv;
      dg -= rho.psi(u) * u;
    }
    dg /= static_cast<double>(t.size()) * sigma;
    if (dg == 0.0) break;
    double next = sigma - g / dg;
    if (!(next > lo && next < hi)) next = std::sqrt(lo * hi);  // stay bracketed
    if (g > 0.0)
      lo = sigma;
    else
      hi = sigma;
    if (std::abs(next - sigma) <= 1e-13 * sigma) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return sigma;
}

ScaleVector column_scales(const DataMatrix& X, const RhoFunction& rho) {
  const Index p = X.cols();
  ScaleVector out;
  out.values.resize(p);
  out.centers.resize(p);

  Index bad_col = -1;
  std::string bad_msg;

#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
  for (Index j = 0; j < p; ++j) {
    std::vector<double> col;
    col.reserve(static_cast<std::size_t>(X.rows()));
    for (Index i = 0; i < X.rows(); ++i)
      if (X.observed(i, j)) col.push_back(X.values(i, j));
    try {
      if (col.size() < 2)
        throw DegenerateScale("column has fewer than 2 observed values", j);
      double m = median(col);
      for (double& x : col) x -= m;
      out.centers(j) = m;
      out.values(j) = m_scale(col, rho);
    } catch (const Error& e) {
#pragma omp critical
      {
        if (bad_col < 0 || j < bad_col) {
          bad_col = j;
          bad_msg = e.what();
        }
      }
    }
  }
  if (bad_col >= 0)
    throw DegenerateScale("column " + std::to_string(bad_col) + ": " + bad_msg,
                          bad_col);
  return out;
}

std::pair<DataMatrix, ScaleVector> robust_standardize(const DataMatrix& X,
                                                      const RhoFunction& rho) {
  ScaleVector D = column_scales(X, rho);
  DataMatrix Z = X;
  for (Index j = 0; j < X.cols(); ++j) Z.values.col(j) /= D.values(j);
  return {std::move(Z), std::move(D)};
}

}  // namespace rcov
