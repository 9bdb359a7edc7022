#pragma once

#include "ftcbf/barriers.hpp"
#include "ftcbf/types.hpp"

#include <optional>
#include <vector>

namespace ftcbf {

/// minimize (u - reference)^T R (u - reference) subject to row . u >= bound for every row.
/// An empty reference means zero.
struct QpProblem {
  Mat R;
  std::vector<ConstraintRow> rows;
  Vec reference;
};

enum class QpStatus { optimal, infeasible };

struct QpResult {
  QpStatus status = QpStatus::optimal;
  Vec u;
  /// Indices into QpProblem::rows of the final working set.
  IndexSet active;
  /// Multipliers of the active rows (same order as `active`).
  Vec multipliers;
  /// Farkas vector y (one entry per row) when infeasible.
  std::optional<Vec> certificate;
  double objective = 0.0;
  int iterations = 0;

  bool feasible() const { return status == QpStatus::optimal; }
};

QpResult solve_qp(const QpProblem& prob);

/// y >= 0 with A^T y = 0 and Xi^T y = -1 when A u <= Xi has no solution; none otherwise.
std::optional<Vec> farkas_certificate(const Mat& A, const Vec& Xi);

/// Standard-form LP: minimize c^T x subject to A x = b, x >= 0.
struct LpResult {
  bool feasible = false;
  bool unbounded = false;
  Vec x;
  double objective = 0.0;
};
LpResult solve_lp(const Mat& A, const Vec& b, const Vec& c);

/// min over rows of (row . u - bound); +inf for an empty row set.
double min_slack(const std::vector<ConstraintRow>& rows, const Vec& u);

/// Stacks rows into A u <= Xi form (A = -rows, Xi = -bounds).
void to_farkas_form(const std::vector<ConstraintRow>& rows, int p, Mat& A, Vec& Xi);

}  // namespace ftcbf
