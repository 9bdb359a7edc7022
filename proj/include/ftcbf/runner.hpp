#pragma once

#include "ftcbf/scenarios.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ftcbf {

/// Scenario with everything derived once per sweep: barrier chains, CLF,
/// estimator bank prototype, nominal gain and fixed rows.
struct PreparedScenario {
  Scenario scen;
  std::vector<BarrierChain> chains;
  /// pattern_chains[b][j]: barrier b under actuator pattern j.
  std::vector<std::vector<BarrierChain>> pattern_chains;
  std::optional<QuadraticClf> clf;
  EstimatorBank bank;
  Mat nominal_gain;
  PolicyConfig policy;
  std::vector<std::string> notes;
};

/// Calibration run with the scenario's estimator settings (attack-free).
Calibration calibrate_scenario(const Scenario& scen, int n_runs, double epsilon);

/// Builds the derived objects. Sensor modes without stored gammas are
/// calibrated here with the scenario's calibration settings.
PreparedScenario prepare(const Scenario& scen);

struct ControlDecision {
  Vec u;
  PolicyOutcome outcome;
};

/// One policy evaluation for the current bank and true state.
ControlDecision decide(const PreparedScenario& ps, const EstimatorBank& bank, const Vec& x);

struct RunSummary {
  std::uint64_t seed = 0;
  /// min over t and barriers of h(x_t) at the true state.
  double min_h = 0.0;
  /// First step with a negative barrier value, -1 if none.
  int first_violation_step = -1;
  std::optional<double> reach_time;
  double final_norm = 0.0;
  int infeasible_steps = 0;
  int step2_steps = 0;
  int step3_steps = 0;
  /// Per single estimator: steps on which it was removed.
  std::vector<int> removal_counts;
  int compensator_clamps = 0;
  double wall_seconds = 0.0;
};

struct RunResult {
  RunSummary summary;
  std::string csv;
  std::vector<Vec> states;
};

RunResult run_closed_loop(const PreparedScenario& ps, std::uint64_t seed, bool with_csv = true);

/// Worker count: `requested` if positive, else hardware concurrency; capped by FTCBF_THREADS.
int worker_count(int requested = 0);

/// Runs every seed on a worker pool; results are in seed order.
std::vector<RunResult> run_sweep(const PreparedScenario& ps, const std::vector<std::uint64_t>& seeds,
                                 bool with_csv = true, int threads = 0);

/// %.17g
std::string format_double(double v);

}  // namespace ftcbf
