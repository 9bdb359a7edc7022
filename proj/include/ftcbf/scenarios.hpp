#pragma once

#include "ftcbf/barriers.hpp"
#include "ftcbf/clf.hpp"
#include "ftcbf/estimator_bank.hpp"
#include "ftcbf/policy.hpp"
#include "ftcbf/simulator.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ftcbf {

struct CompensatorOutput {
  double omega1 = 0.0;
  double omega2 = 0.0;
  /// omega1 was pushed out to the signed floor.
  bool clamped = false;
};

inline constexpr double kOmegaFloor = 1e-3;

/// Dynamic compensator mapping the linearised input back to unicycle speeds:
/// omega1 integrates u1 cos(theta) + u2 sin(theta), omega2 = (u2 cos - u1 sin) / omega1.
CompensatorOutput wmr_compensator(const Vec& u, double theta, double omega1_prev, double dt,
                                  double floor = kOmegaFloor);

struct GoalSpec {
  Vec x_goal;
  double radius = 0.05;
  /// Coordinates used for the reach test; all when empty.
  IndexSet dims;
  /// Explicit Psi; otherwise built from the Lyapunov equation of F.
  Mat Psi;
  Mat F_cl;
  std::optional<double> v_bar;
  /// Estimator deviation bound for the default level; max theta when empty.
  std::optional<double> theta_bar;
  double box_radius = 2.0;
  bool decay = true;
};

enum class NominalKind { zero, lqr };

struct SimSettings {
  double dt = 0.01;
  double horizon = 20.0;
  Vec x0;
};

struct CalibrationSettings {
  int n_runs = 200;
  double epsilon = 0.05;
  double horizon = 10.0;
  std::uint64_t seed = 100000;
};

/// Operating box and sampler seed for the feasibility search.
struct VerifySettings {
  /// [-1, 1]^n when empty.
  Vec box_lo;
  Vec box_hi;
  std::uint64_t seed = 1;
  double boundary_fraction = 0.25;
};

struct Scenario {
  std::string name;
  SystemModel model;
  FaultScenario faults;
  std::vector<Barrier> barriers;
  std::optional<GoalSpec> goal;
  PolicyConfig policy;
  /// Failure patterns L_r guarded by the actuator policy (identity included).
  std::vector<Mat> actuator_patterns;
  NominalKind nominal = NominalKind::zero;
  Mat nominal_Q;
  Mat nominal_R;
  /// Symmetric box |u_k| <= input_limit(k); empty for none.
  Vec input_limit;
  SimSettings sim;
  EstimatorOptions estimator;
  CalibrationSettings calibration;
  std::optional<Vec> gammas;
  std::optional<Mat> thetas;
  ChainOptions chain;
  std::vector<std::uint64_t> seeds;
  VerifySettings verify;
  /// Log unicycle speeds from the compensator alongside the linearised state.
  bool wmr_compensator = false;

  /// Throws ScenarioValidationError on contradictory settings.
  void validate() const;
};

struct WmrConfig {
  double sigma = 0.005;
  double nu = 0.005;
  std::vector<IndexSet> patterns = {{0}, {2}};
  /// Pattern under attack; none for a clean run.
  std::optional<int> active_fault = 1;
  int attack_channel = 2;
  double attack_bias = 1.0;
  double attack_start = 0.0;
  Vec x0;
  double dt = 0.01;
  double horizon = 30.0;
  PolicyMode mode = PolicyMode::sensor_ft_clf;
  /// Symmetric bound on each linearised input; zero for none.
  double input_limit = 0.0;
  /// Effort above which the policy treats the full intersection as a conflict.
  double admissible_input = 20.0;
};

struct BoeingConfig {
  Vec x0;
  double dt = 0.1;
  double horizon = 30.0;
  int l1_step = 10;
  int l2_step = 100;
  double kappa = 1.0;
  double yaw_bound = 0.025;
  PolicyMode mode = PolicyMode::actuator_ft;
};

Mat wmr_F();
Mat wmr_G();
Mat wmr_c();
Mat boeing_F();
Mat boeing_G();

Scenario build_wmr_scenario(const WmrConfig& cfg = {});
Scenario build_boeing_scenario(const BoeingConfig& cfg = {});

/// Rank of [G, FG, ..., F^{n-1}G].
int controllability_rank(const Mat& F, const Mat& G);

}  // namespace ftcbf
