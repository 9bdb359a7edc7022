#pragma once

#include "ftcbf/polynomial.hpp"
#include "ftcbf/types.hpp"

#include <functional>
#include <optional>
#include <random>

namespace ftcbf {

/// Control-affine SDE  dx = (f(x) + g(x) u) dt + sigma dW,  dy = (c x + a) dt + nu dV.
///
/// Linear models carry F and G and derive f, g and the polynomial tables from
/// them. Nonlinear models supply callables; the polynomial tables are optional
/// and only needed for symbolic barrier chains.
struct SystemModel {
  int n = 0;
  int p = 0;
  int q = 0;
  std::function<Vec(const Vec&)> drift;
  std::function<Mat(const Vec&)> input_map;
  /// Optional analytic Jacobian of f. Central differences are used otherwise.
  std::function<Mat(const Vec&)> drift_jacobian;
  Mat c;
  Mat sigma;
  Mat nu;

  bool is_linear = false;
  Mat F;
  Mat G;

  std::optional<PolyVector> poly_drift;
  std::optional<PolyMatrix> poly_input;

  static SystemModel linear(const Mat& F, const Mat& G, const Mat& c, const Mat& sigma,
                            const Mat& nu);

  Vec f(const Vec& x) const;
  Mat g(const Vec& x) const;
  /// d(f + g u)/dx at (x, u).
  Mat jacobian(const Vec& x, const Vec& u) const;

  /// Dimension consistency, finiteness, and (for linear models) agreement of
  /// f, g with F x, G at random states. Throws ContractViolation.
  void validate(unsigned probe_seed = 7) const;
};

enum class AttackKind { none, constant_bias, linear_ramp };

/// False-data injection on a set of output channels.
struct AttackSignal {
  AttackKind kind = AttackKind::none;
  IndexSet channels;
  double amplitude = 0.0;
  double slope = 0.0;
  double start_time = 0.0;

  /// a_t; zero outside `channels` and before `start_time`.
  Vec evaluate(double t, int q) const;
};

struct FailureEvent {
  double t_start = 0.0;
  Mat effectiveness;  // p x p diagonal 0/1
};

struct FaultScenario {
  std::vector<IndexSet> sensor_patterns;
  std::optional<int> active_sensor_fault;
  AttackSignal attack;
  std::vector<FailureEvent> failure_schedule;

  /// Disjoint patterns inside [0, q), attack support inside the active
  /// pattern, 0/1 diagonal effectiveness matrices. Throws ScenarioValidationError.
  void validate(int q, int p) const;
  Vec attack_at(double t, int q) const;
  /// Effectiveness matrix in force at time t (identity before the first event).
  Mat effectiveness_at(double t, int p) const;
};

/// One Euler-Maruyama step: x + (f + g u) dt + sigma * noise * sqrt(dt).
Vec step_true_state(const SystemModel& model, const Vec& x, const Vec& u, double dt,
                    const Vec& noise_draw);

/// Output increment (c x + a_t) dt + nu * noise * sqrt(dt).
Vec measure(const SystemModel& model, const Vec& x, double t, const FaultScenario& scen,
            const Vec& noise_draw, double dt);

/// L u. L must be diagonal with 0/1 entries.
Vec apply_actuator_failure(const Vec& u, const Mat& effectiveness);

bool is_effectiveness_matrix(const Mat& l);

/// Standard normal draws for one simulation run. State noise is drawn before
/// measurement noise at every step so a seed pins the whole trajectory.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : engine_(seed) {}
  Vec draw(int size);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ftcbf
