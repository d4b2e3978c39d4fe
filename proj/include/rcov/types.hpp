#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <utility>

namespace rcov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Missingness mask: 1 = observed, 0 = missing.
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// An n x p data matrix with a missingness mask. Entries under mask == 0
// carry no meaning and must never be read.
struct DataMatrix {
  Matrix values;
  Mask mask;

  DataMatrix() = default;

  // Fully observed matrix.
  explicit DataMatrix(Matrix v)
      : values(std::move(v)), mask(Mask::Ones(values.rows(), values.cols())) {}

  DataMatrix(Matrix v, Mask m) : values(std::move(v)), mask(std::move(m)) {}

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }

  bool observed(Index i, Index j) const { return mask(i, j) != 0; }

  bool complete() const { return mask.minCoeff() != 0; }

  Index observed_count() const {
    return static_cast<Index>(mask.cast<std::int64_t>().sum());
  }

  Index observed_in_row(Index i) const {
    return static_cast<Index>(mask.row(i).cast<std::int64_t>().sum());
  }

  Index observed_in_col(Index j) const {
    return static_cast<Index>(mask.col(j).cast<std::int64_t>().sum());
  }

  // NaN entries become missing cells (values reset to 0 so no NaN survives).
  static DataMatrix from_values_with_nan(const Matrix& v) {
    DataMatrix out;
    out.values = v;
    out.mask = Mask::Ones(v.rows(), v.cols());
    for (Index j = 0; j < v.cols(); ++j)
      for (Index i = 0; i < v.rows(); ++i)
        if (!std::isfinite(v(i, j))) {
          out.mask(i, j) = 0;
          out.values(i, j) = 0.0;
        }
    return out;
  }
};

}  // namespace rcov
