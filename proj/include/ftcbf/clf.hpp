#pragma once

#include "ftcbf/barriers.hpp"
#include "ftcbf/estimator_bank.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ftcbf {

/// V(x) = (x - x_goal)^T Psi (x - x_goal)
struct QuadraticClf {
  Mat Psi;
  Vec x_goal;
  double rho = 0.0;
  double v_bar = 0.0;
  /// |V(x) - V(x')| <= M ||x - x'||^k on the operating box.
  double M = 0.0;
  int k = 1;
  /// Adds rho V(xhat) to the decrease condition.
  bool decay = false;
  /// Set when the Lyapunov solve fell back to a stabilised closed-loop matrix.
  bool used_stabilized = false;
  std::string note;

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian() const { return 2.0 * Psi; }
  void validate() const;
};

struct ClfOptions {
  /// Leading coordinates scaled by 1/d in P_d; n/2 when negative.
  int scaled_dims = -1;
  /// Used when F itself makes the Lyapunov equation singular.
  Mat F_cl;
  /// Input matrix for the default LQR stabilisation (Q = I, R = I) when F_cl is empty.
  Mat G;
  Vec x_goal;
  std::optional<double> v_bar;
  double box_radius = 2.0;
  bool decay = true;
};

/// Psi = D P_L D with F^T P_L + P_L F = -I, D = diag(I/d, I), rho = 1/(d lambda_max(Psi)).
QuadraticClf build_quadratic_clf(const Mat& F, double d, const ClfOptions& opts = {});

/// Psi supplied directly; rho and M as above.
QuadraticClf make_clf(const Mat& Psi, const Vec& x_goal, double d, const ClfOptions& opts = {});

/// row . u >= bound encodes
///   dV/dx (f + g u) + gamma ||dV/dx K c_bar|| + 1/2 tr(nu^T K^T (2 Psi) K nu) [+ rho V] < 0
/// with a fixed strictness margin. Empty when dV/dx vanishes (the row would be 0 . u >= positive).
std::optional<ConstraintRow> clf_row(const QuadraticClf& clf, const EstimatorState& est,
                                     const SystemModel& model, double gamma, int index = 0);

inline constexpr double kClfMargin = 1e-9;

/// First time with ||x_t[dims] - x_goal[dims]|| <= d; `dims` empty means all coordinates.
std::optional<double> goal_reach_time(const std::vector<Vec>& trajectory, double dt,
                                      const Vec& x_goal, double d, const IndexSet& dims = {});

}  // namespace ftcbf
