#pragma once

#include "ftcbf/simulator.hpp"
#include "ftcbf/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ftcbf {

enum class EstimatorKind { single, pair, all };
enum class GainMode { constant_gain, riccati_ode, open_loop };

/// One continuous-time EKF driven by the outputs that survive a fault hypothesis.
struct EstimatorState {
  EstimatorKind kind = EstimatorKind::single;
  int i = -1;
  int j = -1;
  Vec xhat;
  Mat P;
  /// n x |sensors|; empty in open-loop mode.
  Mat K;
  IndexSet sensors;
  Mat c_bar;
  Mat nu_bar;
  Mat R_bar;
  /// Process noise covariance used by the filter design.
  Mat Q;
  GainMode mode = GainMode::constant_gain;
  /// Exponentially smoothed innovation norm.
  double residue = 0.0;

  bool open_loop() const { return mode == GainMode::open_loop; }
  std::string label() const;
};

struct EstimatorOptions {
  GainMode mode = GainMode::constant_gain;
  double p0_scale = 1.0;
  /// Innovation smoothing factor: r <- factor * r + (1 - factor) * raw.
  double residue_smoothing = 0.95;
  /// Filter design intensities; the model's sigma and nu when empty. Lets a
  /// noise-free plant still carry a well-defined gain.
  Mat design_sigma;
  Mat design_nu;
};

struct EstimatorBank {
  std::vector<EstimatorState> singles;
  /// Ordered (0,1), (0,2), ..., (1,2), ...
  std::vector<EstimatorState> pairs;
  /// Optional estimator using every output (baseline controller).
  std::optional<EstimatorState> all_sensors;
  Vec gammas;
  /// Symmetric m x m; diagonal unused.
  Mat thetas;
  double residue_smoothing = 0.95;

  int m() const { return static_cast<int>(singles.size()); }
  int pair_index(int i, int j) const;
  const EstimatorState& pair(int i, int j) const { return pairs[pair_index(i, j)]; }
};

/// y_inc with the entries listed in `pattern` removed.
Vec reduce_output(const Vec& y_inc, const IndexSet& pattern);

/// Builds an estimator for the outputs outside `drop`, initialised at x0.
EstimatorState make_estimator(const SystemModel& model, const IndexSet& drop, const Vec& x0,
                              EstimatorKind kind, int i, int j, const EstimatorOptions& opts);

/// m singles, C(m,2) pairs and (optionally) the all-sensor estimator.
EstimatorBank make_bank(const SystemModel& model, const std::vector<IndexSet>& patterns,
                        const Vec& x0, const EstimatorOptions& opts, bool with_all_sensors);

/// One Euler step of the filter SDE. In riccati_ode mode P and K are advanced
/// as well; the step is split into sub-steps so that the stiff quadratic term
/// of the Riccati ODE stays stable.
EstimatorState ekf_step(const EstimatorState& est, const Vec& u, const Vec& y_reduced, double dt,
                        const SystemModel& model);

/// K = P c^T R^-1 with P the fixed point of the filter Riccati ODE.
Mat steady_state_gain(const Mat& F, const Mat& c_reduced, const Mat& Q, const Mat& R_reduced);

/// ||y_reduced - c_bar xhat dt||_2, blended into the running residue.
double residue(const EstimatorState& est, const Vec& y_reduced, double dt, double smoothing);

/// Advances every estimator in the bank with the measurement increment y_inc.
void step_bank(EstimatorBank& bank, const Vec& u, const Vec& y_inc, double dt,
               const SystemModel& model);

struct Calibration {
  Vec gammas;
  Mat thetas;
  /// Per-run sup errors, one row per run.
  Mat sup_errors;
};

/// Control used during calibration runs: (t, true state, bank) -> u.
using CalibrationControl =
    std::function<Vec(double t, const Vec& x, const EstimatorBank& bank)>;

struct CalibrationConfig {
  int n_runs = 200;
  double horizon = 10.0;
  double dt = 0.01;
  double epsilon = 0.05;
  std::uint64_t seed = 1;
  Vec x0;
  EstimatorOptions estimator;
  /// Zero input when empty.
  CalibrationControl control;
};

/// Attack-free Monte Carlo estimate of the per-filter error radii:
/// gamma_i is the (1 - eps/2) empirical quantile of sup_t ||x_t - xhat_{t,i}||.
Calibration calibrate_gammas(const SystemModel& model, const FaultScenario& scen,
                             const CalibrationConfig& cfg);

/// Empirical q-quantile as the ceil(q N)-th order statistic.
double empirical_quantile(std::vector<double> values, double q);

}  // namespace ftcbf
