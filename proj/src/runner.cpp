#include "ftcbf/runner.hpp"

#include "ftcbf/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace ftcbf {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Calibration calibrate_scenario(const Scenario& scen, int n_runs, double epsilon) {
  CalibrationConfig cc;
  cc.n_runs = n_runs;
  cc.epsilon = epsilon;
  cc.horizon = scen.calibration.horizon;
  cc.dt = scen.sim.dt;
  cc.seed = scen.calibration.seed;
  cc.x0 = scen.sim.x0;
  cc.estimator = scen.estimator;
  return calibrate_gammas(scen.model, scen.faults, cc);
}

namespace {

bool sensor_mode(PolicyMode m) { return m == PolicyMode::sensor_ft || m == PolicyMode::sensor_ft_clf; }

// Baseline in an actuator scenario guards only the no-failure pattern.
bool actuator_scenario(const Scenario& s) { return !s.actuator_patterns.empty(); }

std::vector<ConstraintRow> limit_rows(const Vec& lim) {
  std::vector<ConstraintRow> rows;
  for (Eigen::Index k = 0; k < lim.size(); ++k) {
    for (double sgn : {1.0, -1.0}) {
      ConstraintRow r;
      r.row = sgn * Vec::Unit(lim.size(), k);
      r.bound = -lim(k);
      r.source = RowSource::input_limit;
      r.index = static_cast<int>(k);
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace

PreparedScenario prepare(const Scenario& scen) {
  scen.validate();
  PreparedScenario ps;
  ps.scen = scen;
  const SystemModel& model = scen.model;
  const PolicyMode mode = scen.policy.mode;

  if (mode == PolicyMode::actuator_ft || (mode == PolicyMode::baseline && actuator_scenario(scen))) {
    const std::vector<Mat> pats =
        mode == PolicyMode::actuator_ft ? scen.actuator_patterns : std::vector<Mat>{Mat::Identity(model.p, model.p)};
    for (const auto& b : scen.barriers) ps.pattern_chains.push_back(build_pattern_chains(b, model, pats, scen.chain));
  }
  for (const auto& b : scen.barriers) ps.chains.push_back(build_chain(b, model, scen.chain));

  const int m = static_cast<int>(scen.faults.sensor_patterns.size());
  const bool needs_bank = sensor_mode(mode) || (mode == PolicyMode::baseline && !actuator_scenario(scen));
  if (needs_bank) {
    ps.bank = make_bank(model, scen.faults.sensor_patterns, scen.sim.x0, scen.estimator,
                        mode == PolicyMode::baseline);
    if (mode == PolicyMode::baseline) {
      ps.bank.pairs.clear();
      ps.bank.gammas = Vec::Zero(m);
      ps.bank.thetas = Mat::Zero(m, m);
    } else if (scen.gammas) {
      ps.bank.gammas = *scen.gammas;
      if (scen.thetas) {
        ps.bank.thetas = *scen.thetas;
      } else {
        ps.bank.thetas = Mat::Zero(m, m);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j)
            if (i != j) ps.bank.thetas(i, j) = scen.gammas->coeff(i) + scen.gammas->coeff(j);
      }
    } else {
      const Calibration cal = calibrate_scenario(scen, scen.calibration.n_runs, scen.calibration.epsilon);
      ps.bank.gammas = cal.gammas;
      ps.bank.thetas = cal.thetas;
      ps.notes.push_back("gammas were not stored in the scenario; calibrated at load time");
    }
  }

  if (scen.goal && (mode == PolicyMode::sensor_ft_clf || mode == PolicyMode::baseline)) {
    const GoalSpec& g = *scen.goal;
    ClfOptions co;
    co.x_goal = g.x_goal;
    co.F_cl = g.F_cl;
    co.G = model.is_linear ? model.G : Mat();
    co.box_radius = g.box_radius;
    co.decay = g.decay;
    QuadraticClf clf;
    if (g.Psi.size() != 0) {
      clf = make_clf(g.Psi, g.x_goal, g.radius, co);
    } else {
      require(model.is_linear, "prepare: a CLF without explicit Psi needs a linear model");
      clf = build_quadratic_clf(model.F, g.radius, co);
      if (clf.used_stabilized) ps.notes.push_back(clf.note);
    }
    if (g.v_bar) {
      clf.v_bar = *g.v_bar;
    } else {
      double theta_bar = g.theta_bar.value_or(0.0);
      if (!g.theta_bar && ps.bank.thetas.size() > 0) theta_bar = ps.bank.thetas.maxCoeff();
      clf.v_bar = default_clf_level(clf.Psi, theta_bar);
    }
    ps.clf = clf;
  }

  if (scen.nominal == NominalKind::lqr) {
    const Mat q = scen.nominal_Q.size() ? scen.nominal_Q : Mat::Identity(model.n, model.n);
    const Mat r = scen.nominal_R.size() ? scen.nominal_R : Mat::Identity(model.p, model.p);
    ps.nominal_gain = lqr_gain(model.F, model.G, q, r);
  }

  ps.policy = scen.policy;
  if (scen.input_limit.size()) {
    const auto lim = limit_rows(scen.input_limit);
    ps.policy.fixed_rows.insert(ps.policy.fixed_rows.end(), lim.begin(), lim.end());
  }
  return ps;
}

ControlDecision decide(const PreparedScenario& ps, const EstimatorBank& bank, const Vec& x) {
  const Scenario& s = ps.scen;
  const SystemModel& model = s.model;
  const PolicyMode mode = s.policy.mode;
  ControlDecision d;

  auto reference = [&](const Vec& state) -> Vec {
    if (ps.nominal_gain.size() == 0) return Vec::Zero(model.p);
    return -ps.nominal_gain * state;
  };

  if (!ps.pattern_chains.empty()) {
    const std::vector<Mat> pats =
        mode == PolicyMode::actuator_ft ? s.actuator_patterns : std::vector<Mat>{Mat::Identity(model.p, model.p)};
    const auto rows = assemble_actuator_rows(model, ps.pattern_chains, pats, x, ps.policy);
    d.outcome = solve_fixed(rows, ps.policy, reference(x));
  } else if (mode == PolicyMode::baseline) {
    const EstimatorState& all = *bank.all_sensors;
    const QuadraticClf* clf = ps.clf ? &*ps.clf : nullptr;
    d.outcome = solve_fixed(assemble_baseline_rows(model, all, ps.chains, clf, ps.policy), ps.policy,
                            reference(all.xhat));
    if (d.outcome.infeasible && clf) {
      // The baseline gives up goal reaching before safety.
      d.outcome = solve_fixed(assemble_baseline_rows(model, all, ps.chains, nullptr, ps.policy), ps.policy,
                              reference(all.xhat));
      d.outcome.step = 2;
    }
  } else {
    const QuadraticClf* clf = mode == PolicyMode::sensor_ft_clf && ps.clf ? &*ps.clf : nullptr;
    const ActiveSets sets = active_sets(bank, ps.chains, clf, ps.policy);
    auto builder = [&](const IndexSet& Z, const IndexSet& U) {
      return assemble_sensor_rows(model, bank, ps.chains, clf, Z, U, ps.policy);
    };
    Vec mean = Vec::Zero(model.n);
    for (const auto& e : bank.singles) mean += e.xhat;
    mean /= static_cast<double>(bank.singles.size());
    d.outcome = resolve_conflicts(bank, sets.Z, sets.U, ps.policy, builder, reference(mean));
  }
  d.u = d.outcome.u;
  return d;
}

namespace {

std::string join(const IndexSet& s) {
  std::string out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k) out += ';';
    out += std::to_string(s[k]);
  }
  return out;
}

std::string join(const std::vector<Removal>& rs) {
  std::string out;
  for (std::size_t k = 0; k < rs.size(); ++k) {
    if (k) out += ';';
    out += std::to_string(rs[k].index);
    out += rs[k].reason == RemovalReason::pairwise ? ":pairwise" : ":residue";
  }
  return out;
}

double min_barrier(const std::vector<BarrierChain>& chains, const Vec& x) {
  double h = std::numeric_limits<double>::infinity();
  for (const auto& c : chains) h = std::min(h, c.value(0, x));
  return h;
}

}  // namespace

RunResult run_closed_loop(const PreparedScenario& ps, std::uint64_t seed, bool with_csv) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario& s = ps.scen;
  const SystemModel& model = s.model;
  const double dt = s.sim.dt;
  const int steps = static_cast<int>(std::llround(s.sim.horizon / dt));
  const bool use_bank = !ps.bank.singles.empty() || ps.bank.all_sensors.has_value();
  const int m = static_cast<int>(ps.bank.singles.size());

  EstimatorBank bank = ps.bank;
  NoiseStream noise(seed);
  Vec x = s.sim.x0;
  RunResult res;
  RunSummary& sum = res.summary;
  sum.seed = seed;
  sum.removal_counts.assign(static_cast<std::size_t>(m), 0);
  sum.min_h = std::numeric_limits<double>::infinity();
  double theta = 0.0;
  double omega1 = 0.0;

  std::ostringstream csv;
  if (with_csv) {
    csv << "t";
    for (int i = 0; i < model.n; ++i) csv << ",x" << i + 1;
    std::vector<std::string> labels;
    if (s.policy.mode == PolicyMode::baseline && bank.all_sensors) {
      labels.push_back(bank.all_sensors->label());
    } else {
      for (const auto& e : bank.singles) labels.push_back(e.label());
    }
    for (const auto& l : labels)
      for (int i = 0; i < model.n; ++i) csv << ',' << l << '_' << i + 1;
    for (int k = 0; k < model.p; ++k) csv << ",u" << k + 1;
    for (std::size_t b = 0; b < ps.chains.size(); ++b)
      for (int dd = 0; dd <= std::max(0, ps.chains[b].top()); ++dd) csv << ",h" << b << '_' << dd;
    if (ps.clf) csv << ",V";
    csv << ",active_set,clf_set,removed,step,infeasible";
    for (int i = 0; i < m; ++i) csv << ",residue" << i;
    csv << ",slack_min";
    if (s.wmr_compensator) csv << ",theta,omega1,omega2";
    csv << '\n';
  }

  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    const double hmin = min_barrier(ps.chains, x);
    if (hmin < sum.min_h) sum.min_h = hmin;
    if (hmin < 0.0 && sum.first_violation_step < 0) sum.first_violation_step = k;
    res.states.push_back(x);

    const ControlDecision dec = decide(ps, bank, x);
    const PolicyOutcome& out = dec.outcome;
    if (out.infeasible) ++sum.infeasible_steps;
    if (out.step == 2) ++sum.step2_steps;
    if (out.step == 3) ++sum.step3_steps;
    for (const auto& r : out.removed)
      if (r.index >= 0 && r.index < m) ++sum.removal_counts[static_cast<std::size_t>(r.index)];

    CompensatorOutput comp;
    if (s.wmr_compensator && k < steps) {
      comp = wmr_compensator(dec.u, theta, omega1, dt);
      if (comp.clamped) ++sum.compensator_clamps;
    }

    if (with_csv) {
      csv << format_double(t);
      for (int i = 0; i < model.n; ++i) csv << ',' << format_double(x(i));
      if (s.policy.mode == PolicyMode::baseline && bank.all_sensors) {
        for (int i = 0; i < model.n; ++i) csv << ',' << format_double(bank.all_sensors->xhat(i));
      } else {
        for (const auto& e : bank.singles)
          for (int i = 0; i < model.n; ++i) csv << ',' << format_double(e.xhat(i));
      }
      for (int j = 0; j < model.p; ++j) csv << ',' << format_double(dec.u(j));
      for (const auto& c : ps.chains)
        for (int dd = 0; dd <= std::max(0, c.top()); ++dd) csv << ',' << format_double(c.value(dd, x));
      if (ps.clf) csv << ',' << format_double(ps.clf->value(x));
      csv << ',' << join(out.Z) << ',' << join(out.U) << ',' << join(out.removed) << ',' << out.step << ','
          << (out.infeasible ? 1 : 0);
      for (const auto& e : bank.singles) csv << ',' << format_double(e.residue);
      csv << ',' << (out.rows.empty() ? std::string("inf") : format_double(min_slack(out.rows, dec.u)));
      if (s.wmr_compensator) csv << ',' << format_double(theta) << ',' << format_double(comp.omega1) << ','
                                 << format_double(comp.omega2);
      csv << '\n';
    }
    if (k == steps) break;

    if (s.wmr_compensator) {
      omega1 = comp.omega1;
      theta += comp.omega2 * dt;
    }
    const Mat l = s.faults.effectiveness_at(t, model.p);
    const Vec w = noise.draw(model.n);
    const Vec v = noise.draw(model.q);
    if (use_bank) step_bank(bank, dec.u, measure(model, x, t, s.faults, v, dt), dt, model);
    x = step_true_state(model, x, apply_actuator_failure(dec.u, l), dt, w);
  }

  if (s.goal) sum.reach_time = goal_reach_time(res.states, dt, s.goal->x_goal, s.goal->radius, s.goal->dims);
  sum.final_norm = res.states.back().norm();
  sum.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.csv = csv.str();
  return res;
}

int worker_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("FTCBF_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

std::vector<RunResult> run_sweep(const PreparedScenario& ps, const std::vector<std::uint64_t>& seeds,
                                 bool with_csv, int threads) {
  std::vector<RunResult> out(seeds.size());
  if (seeds.empty()) return out;
  const int workers = std::min<int>(worker_count(threads), static_cast<int>(seeds.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  auto work = [&](int w) {
    try {
      for (std::size_t k = next++; k < seeds.size(); k = next++) out[k] = run_closed_loop(ps, seeds[k], with_csv);
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace ftcbf
