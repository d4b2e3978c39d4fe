#pragma once

#include "rcov/rho.hpp"
#include "rcov/types.hpp"

#include <span>
#include <utility>
#include <vector>

namespace rcov {

// Per-column robust scales (data units) and the medians they were computed
// around.
struct ScaleVector {
  Vector values;
  Vector centers;
};

// Median with the usual average-of-middle-two convention for even sizes.
double median(std::vector<double> v);

// Robust M-scale of a sample: the sigma solving
//   mean_i rho(t_i / (a * sigma)) = delta_m.
// Non-finite entries are treated as missing and skipped (n becomes the
// observed count). Solved by bracketed bisection on log sigma with a Newton
// polish; relative tolerance ~1e-12. Throws DegenerateScale when at least
// half of the observed entries are exactly zero (no positive root exists).
double m_scale(std::span<const double> t, const RhoFunction& rho);

inline double m_scale(const std::vector<double>& t, const RhoFunction& rho) {
  return m_scale(std::span<const double>(t.data(), t.size()), rho);
}

// Column medians m_j and M-scales of (x_ij - m_j) over observed cells.
// Columns run in parallel. Throws DegenerateScale with the column index.
ScaleVector column_scales(const DataMatrix& X, const RhoFunction& rho);

// Z = X * D^-1 columnwise. Z is not centered; the medians live in the
// ScaleVector for downstream use. Missing cells stay missing.
std::pair<DataMatrix, ScaleVector> robust_standardize(const DataMatrix& X,
                                                      const RhoFunction& rho);

}  // namespace rcov
