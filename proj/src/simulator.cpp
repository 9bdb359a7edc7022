#include "ftcbf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ftcbf {

SystemModel SystemModel::linear(const Mat& F, const Mat& G, const Mat& c, const Mat& sigma,
                                const Mat& nu) {
  SystemModel m;
  m.n = static_cast<int>(F.rows());
  m.p = static_cast<int>(G.cols());
  m.q = static_cast<int>(c.rows());
  m.is_linear = true;
  m.F = F;
  m.G = G;
  m.c = c;
  m.sigma = sigma;
  m.nu = nu;
  m.drift = [F](const Vec& x) -> Vec { return F * x; };
  m.input_map = [G](const Vec&) -> Mat { return G; };
  m.drift_jacobian = [F](const Vec&) -> Mat { return F; };

  PolyVector f(m.n);
  PolyMatrix g(m.n, std::vector<Polynomial>(m.p));
  for (int i = 0; i < m.n; ++i) {
    f[i] = Polynomial::affine(F.row(i).transpose(), 0.0);
    for (int j = 0; j < m.p; ++j) g[i][j] = Polynomial::constant(m.n, G(i, j));
  }
  m.poly_drift = std::move(f);
  m.poly_input = std::move(g);
  return m;
}

Vec SystemModel::f(const Vec& x) const { return drift(x); }
Mat SystemModel::g(const Vec& x) const { return input_map(x); }

Mat SystemModel::jacobian(const Vec& x, const Vec& u) const {
  Mat j(n, n);
  if (drift_jacobian) {
    j = drift_jacobian(x);
  } else {
    for (int k = 0; k < n; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
      Vec xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      j.col(k) = (drift(xp) - drift(xm)) / (2.0 * h);
    }
  }
  if (!is_linear) {
    // Input-dependent part d(g(x) u)/dx.
    for (int k = 0; k < n; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
      Vec xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      j.col(k) += (input_map(xp) * u - input_map(xm) * u) / (2.0 * h);
    }
  }
  return j;
}

void SystemModel::validate(unsigned probe_seed) const {
  require(n > 0 && p > 0 && q > 0, "SystemModel: dimensions must be positive");
  require(static_cast<bool>(drift) && static_cast<bool>(input_map),
          "SystemModel: drift and input map must be set");
  require(c.rows() == q && c.cols() == n, "SystemModel: c must be q x n");
  require(sigma.rows() == n && sigma.cols() == n, "SystemModel: sigma must be n x n");
  require(nu.rows() == q && nu.cols() == q, "SystemModel: nu must be q x q");
  require(sigma.allFinite() && nu.allFinite() && c.allFinite(),
          "SystemModel: sigma, nu and c must be finite");
  if (poly_drift) require(static_cast<int>(poly_drift->size()) == n, "SystemModel: poly_drift size");
  if (poly_input) {
    require(static_cast<int>(poly_input->size()) == n, "SystemModel: poly_input rows");
    for (const auto& row : *poly_input) require(static_cast<int>(row.size()) == p, "SystemModel: poly_input cols");
  }

  std::mt19937_64 rng(probe_seed);
  std::uniform_real_distribution<double> uni(-10.0, 10.0);
  for (int trial = 0; trial < 8; ++trial) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = uni(rng);
    const Vec fx = drift(x);
    const Mat gx = input_map(x);
    require(fx.size() == n, "SystemModel: f(x) has wrong dimension");
    require(gx.rows() == n && gx.cols() == p, "SystemModel: g(x) must be n x p");
    if (is_linear) {
      require(F.rows() == n && F.cols() == n && G.rows() == n && G.cols() == p,
              "SystemModel: F must be n x n and G n x p");
      require((fx - F * x).lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, fx.lpNorm<Eigen::Infinity>()),
              "SystemModel: f(x) disagrees with F x");
      require((gx - G).lpNorm<Eigen::Infinity>() <= 1e-12, "SystemModel: g(x) disagrees with G");
    }
  }
}

Vec AttackSignal::evaluate(double t, int q) const {
  Vec a = Vec::Zero(q);
  if (kind == AttackKind::none || t < start_time) return a;
  const double value = kind == AttackKind::constant_bias ? amplitude
                                                         : amplitude + slope * (t - start_time);
  for (int ch : channels) a(ch) = value;
  return a;
}

bool is_effectiveness_matrix(const Mat& l) {
  if (l.rows() != l.cols()) return false;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    for (Eigen::Index j = 0; j < l.cols(); ++j) {
      const double v = l(i, j);
      if (i != j && v != 0.0) return false;
      if (i == j && v != 0.0 && v != 1.0) return false;
    }
  }
  return true;
}

void FaultScenario::validate(int q, int p) const {
  std::vector<int> owner(q, -1);
  for (std::size_t i = 0; i < sensor_patterns.size(); ++i) {
    for (int s : sensor_patterns[i]) {
      if (s < 0 || s >= q) {
        std::ostringstream os;
        os << "fault pattern " << i << " names sensor " << s << " but only " << q << " outputs exist";
        throw ScenarioValidationError(os.str());
      }
      if (owner[s] >= 0) {
        std::ostringstream os;
        os << "fault patterns " << owner[s] << " and " << i << " share sensor " << s;
        throw ScenarioValidationError(os.str());
      }
      owner[s] = static_cast<int>(i);
    }
  }
  if (attack.kind != AttackKind::none) {
    if (!active_sensor_fault) throw ScenarioValidationError("attack configured without an active sensor fault");
    const int r = *active_sensor_fault;
    if (r < 0 || r >= static_cast<int>(sensor_patterns.size()))
      throw ScenarioValidationError("active sensor fault index out of range");
    const IndexSet& pattern = sensor_patterns[r];
    for (int ch : attack.channels) {
      if (std::find(pattern.begin(), pattern.end(), ch) == pattern.end()) {
        std::ostringstream os;
        os << "attack on sensor " << ch << " lies outside fault pattern " << r;
        throw ScenarioValidationError(os.str());
      }
    }
  }
  double last = -1e300;
  for (const auto& ev : failure_schedule) {
    if (ev.effectiveness.rows() != p || !is_effectiveness_matrix(ev.effectiveness))
      throw ScenarioValidationError("failure schedule entry is not a p x p diagonal 0/1 matrix");
    if (ev.t_start < last) throw ScenarioValidationError("failure schedule must be ordered by start time");
    last = ev.t_start;
  }
}

Vec FaultScenario::attack_at(double t, int q) const {
  if (!active_sensor_fault) return Vec::Zero(q);
  return attack.evaluate(t, q);
}

Mat FaultScenario::effectiveness_at(double t, int p) const {
  Mat l = Mat::Identity(p, p);
  for (const auto& ev : failure_schedule) {
    if (t >= ev.t_start) l = ev.effectiveness;
  }
  return l;
}

Vec step_true_state(const SystemModel& model, const Vec& x, const Vec& u, double dt,
                    const Vec& noise_draw) {
  require(dt > 0.0, "step_true_state: dt must be positive");
  require(x.size() == model.n && u.size() == model.p && noise_draw.size() == model.n,
          "step_true_state: dimension mismatch");
  return x + (model.f(x) + model.g(x) * u) * dt + model.sigma * noise_draw * std::sqrt(dt);
}

Vec measure(const SystemModel& model, const Vec& x, double t, const FaultScenario& scen,
            const Vec& noise_draw, double dt) {
  require(x.size() == model.n && noise_draw.size() == model.q, "measure: dimension mismatch");
  return (model.c * x + scen.attack_at(t, model.q)) * dt + model.nu * noise_draw * std::sqrt(dt);
}

Vec apply_actuator_failure(const Vec& u, const Mat& effectiveness) {
  require(effectiveness.rows() == u.size() && is_effectiveness_matrix(effectiveness),
          "apply_actuator_failure: L must be a diagonal 0/1 matrix of size p");
  return effectiveness * u;
}

Vec NoiseStream::draw(int size) {
  Vec v(size);
  for (int i = 0; i < size; ++i) v(i) = normal_(engine_);
  return v;
}

}  // namespace ftcbf
