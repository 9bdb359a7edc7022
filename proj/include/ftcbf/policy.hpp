#pragma once

#include "ftcbf/barriers.hpp"
#include "ftcbf/clf.hpp"
#include "ftcbf/estimator_bank.hpp"
#include "ftcbf/optimizer.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace ftcbf {

enum class PolicyMode { sensor_ft, sensor_ft_clf, actuator_ft, baseline };

PolicyMode parse_policy_mode(const std::string& s);
std::string to_string(PolicyMode m);

struct PolicyConfig {
  PolicyMode mode = PolicyMode::sensor_ft;
  /// Barrier rows are active for estimators with shrunk h^{d'} below delta.
  double delta = std::numeric_limits<double>::infinity();
  double kappa = 1.0;
  /// Error radius assumed by the baseline's all-sensor estimator.
  double baseline_gamma = 0.0;
  Mat R;
  /// Rows that every step carries and no step removes (input limits).
  std::vector<ConstraintRow> fixed_rows;
  /// A Step-1 solution with ||u||_inf above this counts as a conflict and
  /// sends the policy to the pairwise test; kept if that test prunes nothing.
  double admissible_input = std::numeric_limits<double>::infinity();
};

struct ActiveSets {
  IndexSet Z;
  IndexSet U;
};

/// Z: estimators whose shrunk top chain member is below delta for some barrier.
/// U: estimators with V(xhat) above the deactivation level (empty without a CLF).
ActiveSets active_sets(const EstimatorBank& bank, const std::vector<BarrierChain>& chains,
                       const QuadraticClf* clf, const PolicyConfig& cfg);

/// One HOSCBF row per (i in Z, barrier) and one CLF row per j in U.
std::vector<ConstraintRow> assemble_sensor_rows(const SystemModel& model, const EstimatorBank& bank,
                                                const std::vector<BarrierChain>& chains,
                                                const QuadraticClf* clf, const IndexSet& Z,
                                                const IndexSet& U, const PolicyConfig& cfg);

/// One row per (barrier, failure pattern) at the true state. pattern_chains[b][j]
/// belongs to barrier b and pattern j.
std::vector<ConstraintRow> assemble_actuator_rows(
    const SystemModel& model, const std::vector<std::vector<BarrierChain>>& pattern_chains,
    const std::vector<Mat>& patterns, const Vec& x, const PolicyConfig& cfg);

/// Rows from the all-sensor estimator: one per barrier, plus the CLF row when given.
std::vector<ConstraintRow> assemble_baseline_rows(const SystemModel& model,
                                                  const EstimatorState& all_sensors,
                                                  const std::vector<BarrierChain>& chains,
                                                  const QuadraticClf* clf, const PolicyConfig& cfg);

struct PairwiseDecision {
  bool remove_i = false;
  bool remove_j = false;
};

/// Step-2 rule for one pair: only when ||xhat_i - xhat_j|| > theta, drop each side
/// that is farther than theta/2 from the pair estimate.
PairwiseDecision pairwise_rule(double dist_ij, double dist_i_pair, double dist_j_pair, double theta);

/// Indices removed by the Step-2 rule over every pair of the bank.
IndexSet step2_removals(const EstimatorBank& bank);

enum class RemovalReason { pairwise, residue };

struct Removal {
  int index = 0;
  RemovalReason reason = RemovalReason::pairwise;
};

struct PolicyOutcome {
  Vec u;
  QpResult qp;
  IndexSet Z;
  IndexSet U;
  std::vector<Removal> removed;
  std::vector<ConstraintRow> rows;
  /// 1, 2 or 3: the step that produced the control.
  int step = 1;
  /// Every removable constraint dropped and still infeasible; u = 0.
  bool infeasible = false;
  /// The full intersection was feasible only beyond admissible_input.
  bool effort_exceeded = false;
};

using ConstraintBuilder = std::function<std::vector<ConstraintRow>(const IndexSet& Z, const IndexSet& U)>;

/// Step 1 (full intersection), then Step 2 (pairwise pruning) and Step 3
/// (descending smoothed residue, ties to the lower index) on infeasibility.
PolicyOutcome resolve_conflicts(const EstimatorBank& bank, IndexSet Z, IndexSet U,
                                const PolicyConfig& cfg, const ConstraintBuilder& builder,
                                const Vec& reference);

/// Solves one row set with the fixed rows appended; no pruning.
PolicyOutcome solve_fixed(const std::vector<ConstraintRow>& rows, const PolicyConfig& cfg,
                          const Vec& reference);

struct CompatibilityReport {
  bool goal_on_safe_side = false;       // h(x_goal) > 0
  bool goal_ellipsoid_disjoint = false; // level set of V inside the safe half-space
  bool full_rank_input = false;
  bool direction_found = false;         // v in span(G) with a^T v > 0
  Vec direction;
  bool initial_state_ok = false;        // (x0 - x_goal)^T Psi v < 0
  double level = 0.0;
  bool compatible = false;
  std::vector<std::string> reasons;
};

/// Goal/safe-set geometry checks for a half-plane barrier h = a^T x + b and
/// an ellipsoidal goal, at the level theta_bar^2 lambda_max(Psi) / 2.
CompatibilityReport check_clf_cbf_compatibility(const Vec& a, double b, const Mat& Psi,
                                                const Vec& x_goal, double theta_bar,
                                                const SystemModel& model, const Vec& x0 = Vec());

/// theta_bar^2 lambda_max(Psi) / 2
double default_clf_level(const Mat& Psi, double theta_bar);

}  // namespace ftcbf
