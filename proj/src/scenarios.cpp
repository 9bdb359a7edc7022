#include "ftcbf/scenarios.hpp"

#include <cmath>

namespace ftcbf {

CompensatorOutput wmr_compensator(const Vec& u, double theta, double omega1_prev, double dt,
                                  double floor) {
  require(u.size() == 2, "wmr_compensator: u must have two entries");
  require(dt >= 0.0 && floor > 0.0, "wmr_compensator: dt must be nonnegative and floor positive");
  CompensatorOutput out;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  out.omega1 = omega1_prev + (u(0) * c + u(1) * s) * dt;
  const double turn = u(1) * c - u(0) * s;
  if (turn == 0.0) return out;
  if (std::abs(out.omega1) < floor) {
    out.omega1 = out.omega1 < 0.0 ? -floor : floor;
    out.clamped = true;
  }
  out.omega2 = turn / out.omega1;
  return out;
}

Mat wmr_F() {
  Mat f = Mat::Zero(4, 4);
  f(0, 2) = 1.0;
  f(1, 3) = 1.0;
  return f;
}

Mat wmr_G() {
  Mat g = Mat::Zero(4, 2);
  g(2, 0) = 1.0;
  g(3, 1) = 1.0;
  return g;
}

Mat wmr_c() {
  Mat c = Mat::Zero(6, 4);
  c(0, 0) = 1.0;
  c(1, 0) = 1.0;
  c(2, 1) = 1.0;
  c(3, 1) = 1.0;
  c(4, 2) = 1.0;
  c(5, 3) = 1.0;
  return c;
}

Mat boeing_F() {
  Mat f(4, 4);
  f << -0.0558, -0.9968, 0.0802, 0.0415,
        0.598, -0.115, -0.0318, 0.0,
       -3.05, 0.388, -0.465, 0.0,
        0.0, 0.0805, 1.0, 0.0;
  return f;
}

Mat boeing_G() {
  Mat g(4, 3);
  g << 0.00729, 0.01, 0.005,
      -0.475, -0.5, -0.3,
       0.153, 0.2, 0.1,
       0.0, 0.0, 0.0;
  return g;
}

int controllability_rank(const Mat& F, const Mat& G) {
  const Eigen::Index n = F.rows();
  Mat ctrb(n, n * G.cols());
  Mat blk = G;
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * G.cols(), G.cols()) = blk;
    blk = F * blk;
  }
  Eigen::FullPivLU<Mat> lu(ctrb);
  return static_cast<int>(lu.rank());
}

void Scenario::validate() const {
  auto fail = [](const std::string& msg) { throw ScenarioValidationError(msg); };
  try {
    model.validate();
  } catch (const ContractViolation& e) {
    fail(std::string("model: ") + e.what());
  }
  faults.validate(model.q, model.p);
  if (!(sim.dt > 0.0) || !(sim.horizon > 0.0)) fail("sim: dt and horizon must be positive");
  if (sim.x0.size() != model.n) fail("sim: x0 must have n entries");
  for (const auto& b : barriers) {
    if (b.num_vars() > model.n) fail("barrier '" + b.name + "' uses more variables than the state has");
  }
  if (policy.R.rows() != model.p || policy.R.cols() != model.p) fail("policy: R must be p x p");
  if (!(policy.delta > 0.0)) fail("policy: delta must be positive or infinite");
  if (!(policy.kappa > 0.0)) fail("policy: kappa must be positive");
  const int m = static_cast<int>(faults.sensor_patterns.size());
  if (!(policy.admissible_input > 0.0)) fail("policy: admissible_input must be positive");
  const bool sensor_mode = policy.mode == PolicyMode::sensor_ft || policy.mode == PolicyMode::sensor_ft_clf;
  if (sensor_mode && m == 0) fail("policy: sensor modes need at least one sensor fault pattern");
  if (policy.mode == PolicyMode::sensor_ft_clf && !goal) fail("policy: sensor_ft_clf needs a goal block");
  if (policy.mode == PolicyMode::actuator_ft && actuator_patterns.empty()) {
    fail("policy: actuator_ft needs at least one failure pattern");
  }
  for (const auto& l : actuator_patterns) {
    if (l.rows() != model.p || l.cols() != model.p || !is_effectiveness_matrix(l)) {
      fail("actuator pattern must be a p x p diagonal 0/1 matrix");
    }
  }
  if (goal) {
    if (goal->x_goal.size() != model.n) fail("goal: centre must have n entries");
    if (!(goal->radius > 0.0)) fail("goal: radius must be positive");
    for (int d : goal->dims) {
      if (d < 0 || d >= model.n) fail("goal: reach coordinate out of range");
    }
    if (goal->Psi.size() != 0 && (goal->Psi.rows() != model.n || goal->Psi.cols() != model.n)) {
      fail("goal: Psi must be n x n");
    }
  }
  if (input_limit.size() != 0) {
    if (input_limit.size() != model.p) fail("input_limit must have p entries");
    if (!(input_limit.array() > 0.0).all()) fail("input_limit entries must be positive");
  }
  if (nominal == NominalKind::lqr && !model.is_linear) fail("nominal: lqr needs a linear model");
  if (verify.box_lo.size() != verify.box_hi.size()) fail("verify: box_lo and box_hi must have the same size");
  if (verify.box_lo.size() != 0) {
    if (verify.box_lo.size() != model.n) fail("verify: box must have n entries");
    if (!(verify.box_lo.array() <= verify.box_hi.array()).all()) fail("verify: box_lo must not exceed box_hi");
  }
  if (!(verify.boundary_fraction >= 0.0 && verify.boundary_fraction <= 1.0)) {
    fail("verify: boundary_fraction must lie in [0, 1]");
  }
  if (gammas && gammas->size() != m) fail("gammas: one entry per sensor fault pattern");
  if (gammas && (gammas->array() < 0.0).any()) fail("gammas must be nonnegative");
  if (thetas && (thetas->rows() != m || thetas->cols() != m)) fail("thetas must be m x m");
  if (calibration.n_runs < 50) fail("calibration: at least 50 runs are required");
  if (!(calibration.epsilon > 0.0 && calibration.epsilon <= 1.0)) fail("calibration: epsilon must lie in (0, 1]");
}

namespace {

Mat diag3(double a, double b, double c) { return Vec((Vec(3) << a, b, c).finished()).asDiagonal(); }

}  // namespace

Scenario build_wmr_scenario(const WmrConfig& cfg) {
  Scenario s;
  s.name = "wmr";
  s.model = SystemModel::linear(wmr_F(), wmr_G(), wmr_c(), cfg.sigma * Mat::Identity(4, 4),
                                cfg.nu * Mat::Identity(6, 6));
  s.faults.sensor_patterns = cfg.patterns;
  s.faults.active_sensor_fault = cfg.active_fault;
  if (cfg.active_fault) {
    s.faults.attack.kind = AttackKind::constant_bias;
    s.faults.attack.channels = {cfg.attack_channel};
    s.faults.attack.amplitude = cfg.attack_bias;
    s.faults.attack.start_time = cfg.attack_start;
  }
  s.barriers = {Barrier::half_plane(Vec::Unit(4, 1), 0.1, "y_floor")};
  GoalSpec g;
  g.x_goal = Vec::Zero(4);
  g.radius = 0.05;
  g.dims = {0, 1};
  s.goal = g;
  s.policy.mode = cfg.mode;
  s.policy.R = Mat::Identity(2, 2);
  s.policy.admissible_input = cfg.admissible_input;
  if (cfg.input_limit > 0.0) s.input_limit = Vec::Constant(2, cfg.input_limit);
  s.sim.dt = cfg.dt;
  s.sim.horizon = cfg.horizon;
  s.sim.x0 = cfg.x0.size() == 4 ? cfg.x0 : (Vec(4) << -1.0, 0.5, 0.0, 0.0).finished();
  s.wmr_compensator = true;
  s.verify.box_lo = Vec::Constant(4, -2.0);
  s.verify.box_hi = Vec::Constant(4, 2.0);
  for (std::uint64_t k = 1; k <= 20; ++k) s.seeds.push_back(k);
  s.validate();
  return s;
}

Scenario build_boeing_scenario(const BoeingConfig& cfg) {
  Scenario s;
  s.name = "boeing747";
  Mat c = Mat::Zero(1, 4);
  c(0, 1) = 1.0;
  s.model = SystemModel::linear(boeing_F(), boeing_G(), c, Mat::Zero(4, 4), Mat::Zero(1, 1));
  s.faults.failure_schedule = {{cfg.l1_step * cfg.dt, diag3(1, 0, 1)}, {cfg.l2_step * cfg.dt, diag3(0, 1, 1)}};
  s.barriers = {Barrier::half_plane(Vec::Unit(4, 1), cfg.yaw_bound, "yaw_lower"),
                Barrier::half_plane((Vec(4) << 0.0, -1.0, 0.0, 0.0).finished(), cfg.yaw_bound, "yaw_upper")};
  s.policy.mode = cfg.mode;
  s.policy.kappa = cfg.kappa;
  s.policy.R = Mat::Identity(3, 3);
  s.actuator_patterns = {Mat::Identity(3, 3), diag3(1, 0, 1), diag3(0, 1, 1)};
  s.nominal = NominalKind::lqr;
  s.nominal_Q = Mat::Identity(4, 4);
  s.nominal_R = Mat::Identity(3, 3);
  s.sim.dt = cfg.dt;
  s.sim.horizon = cfg.horizon;
  s.sim.x0 = cfg.x0.size() == 4 ? cfg.x0 : (Vec(4) << 0.05, 0.02, 0.0, 0.0).finished();
  s.seeds = {1};
  s.validate();
  return s;
}

}  // namespace ftcbf
