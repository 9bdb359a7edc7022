#include "ftcbf/policy.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace ftcbf {

PolicyMode parse_policy_mode(const std::string& s) {
  if (s == "sensor_ft") return PolicyMode::sensor_ft;
  if (s == "sensor_ft_clf") return PolicyMode::sensor_ft_clf;
  if (s == "actuator_ft") return PolicyMode::actuator_ft;
  if (s == "baseline") return PolicyMode::baseline;
  throw ScenarioValidationError("unknown policy mode '" + s + "'");
}

std::string to_string(PolicyMode m) {
  switch (m) {
    case PolicyMode::sensor_ft: return "sensor_ft";
    case PolicyMode::sensor_ft_clf: return "sensor_ft_clf";
    case PolicyMode::actuator_ft: return "actuator_ft";
    case PolicyMode::baseline: return "baseline";
  }
  return "?";
}

namespace {

double gamma_of(const EstimatorBank& bank, int i) {
  return bank.gammas.size() > i ? bank.gammas(i) : 0.0;
}

void erase_index(IndexSet& s, int i) { s.erase(std::remove(s.begin(), s.end(), i), s.end()); }

bool contains(const IndexSet& s, int i) { return std::find(s.begin(), s.end(), i) != s.end(); }

}  // namespace

ActiveSets active_sets(const EstimatorBank& bank, const std::vector<BarrierChain>& chains,
                       const QuadraticClf* clf, const PolicyConfig& cfg) {
  ActiveSets out;
  for (int i = 0; i < bank.m(); ++i) {
    const Vec& xh = bank.singles[i].xhat;
    bool active = std::isinf(cfg.delta) && cfg.delta > 0;
    for (const auto& ch : chains) {
      if (active) break;
      active = ch.shrunk(ch.top(), xh, gamma_of(bank, i)) < cfg.delta;
    }
    if (active) out.Z.push_back(i);
    if (clf && clf->value(xh) > clf->v_bar) out.U.push_back(i);
  }
  return out;
}

std::vector<ConstraintRow> assemble_sensor_rows(const SystemModel& model, const EstimatorBank& bank,
                                                const std::vector<BarrierChain>& chains,
                                                const QuadraticClf* clf, const IndexSet& Z,
                                                const IndexSet& U, const PolicyConfig& cfg) {
  std::vector<ConstraintRow> rows;
  for (int i : Z) {
    const EstimatorState& est = bank.singles[i];
    for (std::size_t b = 0; b < chains.size(); ++b) {
      const BarrierChain& ch = chains[b];
      if (!std::isinf(cfg.delta) && !(ch.shrunk(ch.top(), est.xhat, gamma_of(bank, i)) < cfg.delta)) {
        continue;
      }
      ConstraintRow r = hoscbf_row(ch, est, model, gamma_of(bank, i), i);
      r.barrier = static_cast<int>(b);
      rows.push_back(std::move(r));
    }
  }
  if (clf) {
    for (int j : U) {
      if (auto r = clf_row(*clf, bank.singles[j], model, gamma_of(bank, j), j)) rows.push_back(*r);
    }
  }
  return rows;
}

std::vector<ConstraintRow> assemble_actuator_rows(
    const SystemModel& model, const std::vector<std::vector<BarrierChain>>& pattern_chains,
    const std::vector<Mat>& patterns, const Vec& x, const PolicyConfig& cfg) {
  std::vector<ConstraintRow> rows;
  for (std::size_t b = 0; b < pattern_chains.size(); ++b) {
    auto rb = af_rows(pattern_chains[b], x, patterns, model, cfg.kappa, static_cast<int>(b));
    rows.insert(rows.end(), rb.begin(), rb.end());
  }
  return rows;
}

std::vector<ConstraintRow> assemble_baseline_rows(const SystemModel& model,
                                                  const EstimatorState& all_sensors,
                                                  const std::vector<BarrierChain>& chains,
                                                  const QuadraticClf* clf, const PolicyConfig& cfg) {
  std::vector<ConstraintRow> rows;
  for (std::size_t b = 0; b < chains.size(); ++b) {
    ConstraintRow r = hoscbf_row(chains[b], all_sensors, model, cfg.baseline_gamma, -1);
    r.barrier = static_cast<int>(b);
    rows.push_back(std::move(r));
  }
  if (clf && clf->value(all_sensors.xhat) > clf->v_bar) {
    if (auto r = clf_row(*clf, all_sensors, model, cfg.baseline_gamma, -1)) rows.push_back(*r);
  }
  return rows;
}

PairwiseDecision pairwise_rule(double dist_ij, double dist_i_pair, double dist_j_pair, double theta) {
  PairwiseDecision d;
  if (!(dist_ij > theta)) return d;
  d.remove_i = dist_i_pair > theta / 2.0;
  d.remove_j = dist_j_pair > theta / 2.0;
  return d;
}

IndexSet step2_removals(const EstimatorBank& bank) {
  IndexSet out;
  const int m = bank.m();
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const Vec& xi = bank.singles[i].xhat;
      const Vec& xj = bank.singles[j].xhat;
      const Vec& xij = bank.pair(i, j).xhat;
      const double theta = bank.thetas(i, j);
      const auto d = pairwise_rule((xi - xj).norm(), (xi - xij).norm(), (xj - xij).norm(), theta);
      if (d.remove_i) out.push_back(i);
      if (d.remove_j) out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PolicyOutcome solve_fixed(const std::vector<ConstraintRow>& rows, const PolicyConfig& cfg,
                          const Vec& reference) {
  PolicyOutcome out;
  out.rows = rows;
  out.rows.insert(out.rows.end(), cfg.fixed_rows.begin(), cfg.fixed_rows.end());
  out.qp = solve_qp({cfg.R, out.rows, reference});
  if (out.qp.feasible()) {
    out.u = out.qp.u;
  } else {
    out.infeasible = true;
    out.u = Vec::Zero(cfg.R.rows());
  }
  return out;
}

PolicyOutcome resolve_conflicts(const EstimatorBank& bank, IndexSet Z, IndexSet U,
                                const PolicyConfig& cfg, const ConstraintBuilder& builder,
                                const Vec& reference) {
  PolicyOutcome out;
  auto attempt = [&](int step) {
    PolicyOutcome o = solve_fixed(builder(Z, U), cfg, reference);
    o.Z = Z;
    o.U = U;
    o.removed = out.removed;
    o.step = step;
    return o;
  };

  PolicyOutcome r = attempt(1);
  auto large = [&](const PolicyOutcome& o) {
    return !o.infeasible && o.u.lpNorm<Eigen::Infinity>() > cfg.admissible_input;
  };
  if (!r.infeasible && !large(r)) return r;
  std::optional<PolicyOutcome> fallback;
  if (!r.infeasible) fallback = r;

  bool changed = false;
  for (int i : step2_removals(bank)) {
    if (contains(Z, i) || contains(U, i)) {
      erase_index(Z, i);
      erase_index(U, i);
      out.removed.push_back({i, RemovalReason::pairwise});
      changed = true;
    }
  }
  if (changed) {
    r = attempt(2);
    r.effort_exceeded = fallback.has_value();
    if (!r.infeasible && !large(r)) return r;
    if (!r.infeasible) fallback = r;
  }
  if (fallback) {
    // Feasible, though only with inadmissible effort; Step 3 is reserved for
    // a genuinely empty intersection.
    fallback->effort_exceeded = true;
    return *fallback;
  }

  IndexSet candidates = set_union(Z, U);
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    return bank.singles[a].residue > bank.singles[b].residue;
  });
  for (int i : candidates) {
    erase_index(Z, i);
    erase_index(U, i);
    out.removed.push_back({i, RemovalReason::residue});
    r = attempt(3);
    if (!r.infeasible) return r;
  }
  r.step = 3;
  r.infeasible = true;
  r.u = Vec::Zero(cfg.R.rows());
  return r;
}

double default_clf_level(const Mat& Psi, double theta_bar) {
  Eigen::SelfAdjointEigenSolver<Mat> es(Psi, Eigen::EigenvaluesOnly);
  return theta_bar * theta_bar * es.eigenvalues().maxCoeff() / 2.0;
}

CompatibilityReport check_clf_cbf_compatibility(const Vec& a, double b, const Mat& Psi,
                                                const Vec& x_goal, double theta_bar,
                                                const SystemModel& model, const Vec& x0) {
  require(model.is_linear, "check_clf_cbf_compatibility: needs an LTI model");
  require(a.size() == model.n && Psi.rows() == model.n && x_goal.size() == model.n,
          "check_clf_cbf_compatibility: dimension mismatch");
  CompatibilityReport rep;
  const double h_goal = a.dot(x_goal) + b;
  rep.goal_on_safe_side = h_goal > 0.0;
  if (!rep.goal_on_safe_side) rep.reasons.push_back("goal centre violates the half-plane (goal on the unsafe side)");

  rep.level = default_clf_level(Psi, theta_bar);
  // min of a^T x over {(x - g)^T Psi (x - g) <= L} is a^T g - sqrt(L a^T Psi^-1 a).
  const double reach = std::sqrt(rep.level * a.dot(Psi.ldlt().solve(a)));
  rep.goal_ellipsoid_disjoint = h_goal - reach > 0.0;
  if (!rep.goal_ellipsoid_disjoint) {
    rep.reasons.push_back("goal ellipsoid at the compatibility level reaches the unsafe half-plane");
  }

  Eigen::FullPivLU<Mat> lu(model.G);
  rep.full_rank_input = lu.rank() == model.n;
  if (!rep.full_rank_input) {
    const Mat basis = lu.image(model.G);
    for (Eigen::Index k = 0; k < basis.cols() && !rep.direction_found; ++k) {
      for (double sgn : {1.0, -1.0}) {
        const Vec v = sgn * basis.col(k);
        if (a.dot(v) > 1e-12) {
          rep.direction_found = true;
          rep.direction = v;
          break;
        }
      }
    }
    if (!rep.direction_found) {
      rep.reasons.push_back("no input direction v with a^T v > 0 (barrier not directly actuated)");
    } else if (x0.size() == model.n) {
      rep.initial_state_ok = (x0 - x_goal).dot(Psi * rep.direction) < 0.0;
      if (!rep.initial_state_ok) {
        rep.reasons.push_back("initial state does not satisfy the hyperplane condition for v");
      }
    }
  }
  rep.compatible = rep.goal_on_safe_side && rep.goal_ellipsoid_disjoint;
  return rep;
}

}  // namespace ftcbf
