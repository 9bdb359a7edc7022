#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace ftcbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Sorted, 0-based set of indices (sensor channels, actuators, estimators).
using IndexSet = std::vector<int>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch or a violated precondition of an operation.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Scenario definition is inconsistent (bad attack support, overlapping patterns, ...).
class ScenarioValidationError : public Error {
 public:
  using Error::Error;
};

class EstimatorConfigError : public Error {
 public:
  using Error::Error;
};

/// The Riccati iteration did not settle; usually the pair (F, c) is not detectable.
class DetectabilityError : public Error {
 public:
  using Error::Error;
};

class UncontrollableBarrierError : public Error {
 public:
  using Error::Error;
};

class RedundancyViolationError : public Error {
 public:
  using Error::Error;
};

class LyapunovError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside the QP/LP solvers. Distinct from infeasibility.
class SolverError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

/// `rows` of `m` with the indices in `drop` removed (order of the rest preserved).
Mat remove_rows(const Mat& m, const IndexSet& drop);
Mat remove_rows_and_cols(const Mat& m, const IndexSet& drop);
IndexSet complement(const IndexSet& drop, int size);
IndexSet set_union(const IndexSet& a, const IndexSet& b);

}  // namespace ftcbf
