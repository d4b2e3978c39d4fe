#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace rcov {

// Base class for all estimator errors. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A column whose scale equation has no positive root (too many exact zeros,
// or a constant column).
class DegenerateScale : public Error {
 public:
  explicit DegenerateScale(const std::string& msg, Eigen::Index column = -1)
      : Error(msg), column(column) {}
  Eigen::Index column;
};

// Residual column with a degenerate M-scale inside the subspace fit.
class DegenerateColumn : public Error {
 public:
  explicit DegenerateColumn(const std::string& msg, Eigen::Index column = -1)
      : Error(msg), column(column) {}
  Eigen::Index column;
};

class EmptyRow : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& msg, std::vector<double> trace)
      : Error(msg), objective_trace(std::move(trace)) {}
  std::vector<double> objective_trace;
};

class SingularScatter : public Error {
 public:
  using Error::Error;
};

class TooFewCases : public Error {
 public:
  using Error::Error;
};

class InvalidDelta : public Error {
 public:
  using Error::Error;
};

class DegenerateNormalizer : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class SingleClass : public Error {
 public:
  using Error::Error;
};

class ConstantInput : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class BlockNotPD : public Error {
 public:
  using Error::Error;
};

class SingleCaseFold : public Error {
 public:
  using Error::Error;
};

class InfeasibleNaRate : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

// Wraps a failure from one stage of a multi-stage pipeline with the stage
// name, so callers can report where things went wrong.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& msg)
      : Error(stage + ": " + msg), stage(stage) {}
  std::string stage;
};

}  // namespace rcov
