#include "ftcbf/estimator_bank.hpp"

#include "ftcbf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ftcbf {

std::string EstimatorState::label() const {
  std::ostringstream os;
  switch (kind) {
    case EstimatorKind::single: os << "est" << i; break;
    case EstimatorKind::pair: os << "est" << i << "_" << j; break;
    case EstimatorKind::all: os << "est_all"; break;
  }
  return os.str();
}

int EstimatorBank::pair_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  const int mm = m();
  require(i >= 0 && j < mm && i != j, "EstimatorBank::pair_index: bad pair");
  // Pairs (a, b) with a < i come first.
  return i * mm - i * (i + 1) / 2 + (j - i - 1);
}

Vec reduce_output(const Vec& y_inc, const IndexSet& pattern) {
  const IndexSet keep = complement(pattern, static_cast<int>(y_inc.size()));
  Vec out(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) out(static_cast<Eigen::Index>(k)) = y_inc(keep[k]);
  return out;
}

namespace {

Mat gain_from(const Mat& p, const Mat& c_bar, const Mat& r_bar) {
  return r_bar.ldlt().solve(c_bar * p).transpose();
}

void check_r(const Mat& r_bar) {
  if (r_bar.size() == 0) return;
  Eigen::JacobiSVD<Mat> svd(r_bar);
  if (!(svd.singularValues().minCoeff() > 1e-12)) {
    throw EstimatorConfigError("reduced measurement covariance is singular");
  }
}

}  // namespace

EstimatorState make_estimator(const SystemModel& model, const IndexSet& drop, const Vec& x0,
                              EstimatorKind kind, int i, int j, const EstimatorOptions& opts) {
  require(x0.size() == model.n, "make_estimator: x0 has wrong dimension");
  EstimatorState est;
  est.kind = kind;
  est.i = i;
  est.j = j;
  est.xhat = x0;
  est.P = opts.p0_scale * Mat::Identity(model.n, model.n);
  est.sensors = complement(drop, model.q);
  const Mat& sigma = opts.design_sigma.size() > 0 ? opts.design_sigma : model.sigma;
  const Mat& nu = opts.design_nu.size() > 0 ? opts.design_nu : model.nu;
  require(sigma.rows() == model.n && sigma.cols() == model.n && nu.rows() == model.q &&
              nu.cols() == model.q,
          "make_estimator: design noise intensities have wrong dimensions");
  est.c_bar = remove_rows(model.c, drop);
  est.nu_bar = remove_rows_and_cols(nu, drop);
  est.R_bar = est.nu_bar * est.nu_bar.transpose();
  est.Q = sigma * sigma.transpose();
  if (est.sensors.empty()) {
    est.mode = GainMode::open_loop;
    est.K.resize(model.n, 0);
    return est;
  }
  check_r(est.R_bar);
  est.mode = opts.mode;
  if (est.mode == GainMode::constant_gain) {
    const Mat f = model.is_linear ? model.F : model.jacobian(x0, Vec::Zero(model.p));
    est.P = riccati_fixed_point(f, est.Q, est.c_bar.transpose() * est.R_bar.ldlt().solve(est.c_bar),
                                Mat::Zero(model.n, model.n));
    est.K = gain_from(est.P, est.c_bar, est.R_bar);
  } else {
    est.K = gain_from(est.P, est.c_bar, est.R_bar);
  }
  return est;
}

EstimatorBank make_bank(const SystemModel& model, const std::vector<IndexSet>& patterns,
                        const Vec& x0, const EstimatorOptions& opts, bool with_all_sensors) {
  EstimatorBank bank;
  bank.residue_smoothing = opts.residue_smoothing;
  const int m = static_cast<int>(patterns.size());
  for (int i = 0; i < m; ++i) {
    bank.singles.push_back(make_estimator(model, patterns[i], x0, EstimatorKind::single, i, -1, opts));
  }
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      bank.pairs.push_back(make_estimator(model, set_union(patterns[i], patterns[j]), x0,
                                          EstimatorKind::pair, i, j, opts));
    }
  }
  if (with_all_sensors) {
    bank.all_sensors = make_estimator(model, {}, x0, EstimatorKind::all, -1, -1, opts);
  }
  bank.gammas = Vec::Zero(m);
  bank.thetas = Mat::Zero(m, m);
  return bank;
}

EstimatorState ekf_step(const EstimatorState& est, const Vec& u, const Vec& y_reduced, double dt,
                        const SystemModel& model) {
  require(dt > 0.0, "ekf_step: dt must be positive");
  require(est.xhat.size() == model.n && u.size() == model.p, "ekf_step: dimension mismatch");
  require(y_reduced.size() == static_cast<Eigen::Index>(est.sensors.size()),
          "ekf_step: reduced output has wrong dimension");
  EstimatorState out = est;
  if (est.mode == GainMode::open_loop) {
    out.xhat = est.xhat + (model.f(est.xhat) + model.g(est.xhat) * u) * dt;
    return out;
  }
  if (est.mode == GainMode::constant_gain) {
    out.xhat = est.xhat + (model.f(est.xhat) + model.g(est.xhat) * u) * dt +
               est.K * (y_reduced - est.c_bar * est.xhat * dt);
    return out;
  }

  check_r(est.R_bar);
  const Mat s = est.c_bar.transpose() * est.R_bar.ldlt().solve(est.c_bar);
  const Mat& q = est.Q;
  const Mat f0 = model.jacobian(est.xhat, u);
  const double stiff = (est.P * s).lpNorm<Eigen::Infinity>() + f0.lpNorm<Eigen::Infinity>();
  const int nsub = static_cast<int>(std::clamp(std::ceil(dt * stiff / 0.2), 1.0, 100000.0));
  const double h = dt / nsub;
  const Vec dy = y_reduced / nsub;
  for (int k = 0; k < nsub; ++k) {
    const Mat fj = k == 0 ? f0 : model.jacobian(out.xhat, u);
    out.xhat = out.xhat + (model.f(out.xhat) + model.g(out.xhat) * u) * h +
               out.K * (dy - out.c_bar * out.xhat * h);
    Mat p = out.P + h * riccati_rhs(fj, q, s, out.P);
    p = symmetrize(p);
    out.P = p;
    out.K = gain_from(out.P, out.c_bar, out.R_bar);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(out.P, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9) {
    throw Error("ekf_step: covariance lost positive semidefiniteness");
  }
  return out;
}

Mat steady_state_gain(const Mat& F, const Mat& c_reduced, const Mat& Q, const Mat& R_reduced) {
  require(F.rows() == F.cols() && c_reduced.cols() == F.rows() && Q.rows() == F.rows() &&
              R_reduced.rows() == c_reduced.rows(),
          "steady_state_gain: dimension mismatch");
  check_r(R_reduced);
  const Mat s = c_reduced.transpose() * R_reduced.ldlt().solve(c_reduced);
  const Mat p = riccati_fixed_point(F, Q, s, Mat::Zero(F.rows(), F.cols()));
  return gain_from(p, c_reduced, R_reduced);
}

double residue(const EstimatorState& est, const Vec& y_reduced, double dt, double smoothing) {
  if (est.sensors.empty()) return smoothing * est.residue;
  const double raw = (y_reduced - est.c_bar * est.xhat * dt).norm();
  return smoothing * est.residue + (1.0 - smoothing) * raw;
}

namespace {

IndexSet dropped(const EstimatorState& est, int q) { return complement(est.sensors, q); }

void advance(EstimatorState& est, const Vec& u, const Vec& y_inc, double dt, const SystemModel& model,
             double smoothing) {
  const Vec yr = reduce_output(y_inc, dropped(est, model.q));
  est.residue = residue(est, yr, dt, smoothing);
  const double r = est.residue;
  est = ekf_step(est, u, yr, dt, model);
  est.residue = r;
}

}  // namespace

void step_bank(EstimatorBank& bank, const Vec& u, const Vec& y_inc, double dt,
               const SystemModel& model) {
  for (auto& e : bank.singles) advance(e, u, y_inc, dt, model, bank.residue_smoothing);
  for (auto& e : bank.pairs) advance(e, u, y_inc, dt, model, bank.residue_smoothing);
  if (bank.all_sensors) advance(*bank.all_sensors, u, y_inc, dt, model, bank.residue_smoothing);
}

double empirical_quantile(std::vector<double> values, double q) {
  require(!values.empty(), "empirical_quantile: no samples");
  require(q >= 0.0 && q <= 1.0, "empirical_quantile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  const long k = std::max(1L, static_cast<long>(std::ceil(q * n - 1e-12)));
  return values[static_cast<std::size_t>(k - 1)];
}

Calibration calibrate_gammas(const SystemModel& model, const FaultScenario& scen,
                             const CalibrationConfig& cfg) {
  require(cfg.n_runs >= 50, "calibrate_gammas: at least 50 runs are required");
  require(cfg.dt > 0.0 && cfg.horizon > 0.0, "calibrate_gammas: dt and horizon must be positive");
  require(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0, "calibrate_gammas: epsilon must lie in (0, 1]");
  require(cfg.x0.size() == model.n, "calibrate_gammas: x0 has wrong dimension");

  FaultScenario clean = scen;
  clean.attack = AttackSignal{};
  clean.active_sensor_fault.reset();

  const int m = static_cast<int>(scen.sensor_patterns.size());
  const EstimatorBank proto = make_bank(model, scen.sensor_patterns, cfg.x0, cfg.estimator, false);
  const int steps = static_cast<int>(std::llround(cfg.horizon / cfg.dt));

  Calibration cal;
  cal.sup_errors = Mat::Zero(cfg.n_runs, m);
  for (int run = 0; run < cfg.n_runs; ++run) {
    EstimatorBank bank = proto;
    bank.pairs.clear();
    NoiseStream noise(cfg.seed + static_cast<std::uint64_t>(run));
    Vec x = cfg.x0;
    for (int k = 0; k < steps; ++k) {
      const double t = k * cfg.dt;
      const Vec u = cfg.control ? cfg.control(t, x, bank) : Vec::Zero(model.p);
      const Mat l = clean.effectiveness_at(t, model.p);
      const Vec w = noise.draw(model.n);
      const Vec v = noise.draw(model.q);
      const Vec y = measure(model, x, t, clean, v, cfg.dt);
      step_bank(bank, u, y, cfg.dt, model);
      x = step_true_state(model, x, apply_actuator_failure(u, l), cfg.dt, w);
      for (int i = 0; i < m; ++i) {
        cal.sup_errors(run, i) = std::max(cal.sup_errors(run, i), (x - bank.singles[i].xhat).norm());
      }
    }
  }
  cal.gammas = Vec::Zero(m);
  for (int i = 0; i < m; ++i) {
    std::vector<double> col(cal.sup_errors.col(i).data(), cal.sup_errors.col(i).data() + cfg.n_runs);
    cal.gammas(i) = empirical_quantile(col, 1.0 - cfg.epsilon / 2.0);
  }
  cal.thetas = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i != j) cal.thetas(i, j) = cal.gammas(i) + cal.gammas(j);
    }
  }
  return cal;
}

}  // namespace ftcbf
