#include "ftcbf/io.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace ftcbf {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw ScenarioValidationError("scenario file: " + what); }

double inf() { return std::numeric_limits<double>::infinity(); }

void check_keys(const json& block, const std::string& name, const std::set<std::string>& allowed) {
  if (!block.is_object()) fail("block '" + name + "' must be an object");
  for (const auto& [k, v] : block.items()) {
    if (!allowed.count(k)) fail("unknown key '" + k + "' in block '" + name + "'");
  }
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) fail(what + " must be a number");
  return j.get<double>();
}

// null stands for +inf (JSON has no infinity).
double number_or_inf(const json& j, const std::string& what) {
  if (j.is_null()) return inf();
  return number(j, what);
}

int integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) fail(what + " must be an integer");
  return j.get<int>();
}

std::uint64_t unsigned_integer(const json& j, const std::string& what) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    fail(what + " must be a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

bool boolean(const json& j, const std::string& what) {
  if (!j.is_boolean()) fail(what + " must be true or false");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& what) {
  if (!j.is_string()) fail(what + " must be a string");
  return j.get<std::string>();
}

Vec to_vec(const json& j, const std::string& what) {
  if (!j.is_array()) fail(what + " must be an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], what);
  return v;
}

Mat to_mat(const json& j, const std::string& what) {
  if (!j.is_array()) fail(what + " must be an array of rows");
  if (j.empty()) return Mat();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) fail(what + " rows must be arrays of equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], what);
    }
  }
  return m;
}

IndexSet to_indices(const json& j, const std::string& what) {
  if (!j.is_array()) fail(what + " must be an array of indices");
  IndexSet out;
  for (const auto& e : j) out.push_back(integer(e, what));
  return out;
}

json from_vec(const Vec& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

json from_mat(const Mat& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

json inf_or_number(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

template <class T>
json opt_number(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void parse_model(const json& b, Scenario& s) {
  check_keys(b, "model", {"F", "G", "c", "sigma", "nu"});
  const SystemModel& cur = s.model;
  auto get = [&](const char* key, const Mat& fallback) {
    if (b.contains(key)) return to_mat(b.at(key), std::string("model.") + key);
    if (fallback.size() == 0) fail(std::string("model.") + key + " is required");
    return fallback;
  };
  const Mat F = get("F", cur.is_linear ? cur.F : Mat());
  const Mat G = get("G", cur.is_linear ? cur.G : Mat());
  const Mat c = get("c", cur.c);
  const Mat sigma = get("sigma", cur.sigma);
  const Mat nu = get("nu", cur.nu);
  try {
    s.model = SystemModel::linear(F, G, c, sigma, nu);
  } catch (const ContractViolation& e) {
    fail(std::string("model: ") + e.what());
  }
}

AttackKind parse_attack_kind(const std::string& k) {
  if (k == "none") return AttackKind::none;
  if (k == "constant_bias") return AttackKind::constant_bias;
  if (k == "linear_ramp") return AttackKind::linear_ramp;
  fail("unknown attack kind '" + k + "'");
}

std::string attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::constant_bias: return "constant_bias";
    case AttackKind::linear_ramp: return "linear_ramp";
  }
  return "none";
}

void parse_faults(const json& b, Scenario& s) {
  check_keys(b, "faults", {"sensor_patterns", "active_sensor_fault", "attack", "failure_schedule"});
  FaultScenario& f = s.faults;
  if (b.contains("sensor_patterns")) {
    const json& p = b.at("sensor_patterns");
    if (!p.is_array()) fail("faults.sensor_patterns must be an array of index arrays");
    f.sensor_patterns.clear();
    for (const auto& e : p) f.sensor_patterns.push_back(to_indices(e, "faults.sensor_patterns"));
  }
  if (b.contains("active_sensor_fault")) {
    const json& a = b.at("active_sensor_fault");
    f.active_sensor_fault = a.is_null() ? std::nullopt : std::optional<int>(integer(a, "faults.active_sensor_fault"));
  }
  if (b.contains("attack")) {
    const json& a = b.at("attack");
    check_keys(a, "faults.attack", {"kind", "channels", "amplitude", "slope", "start_time"});
    if (a.contains("kind")) f.attack.kind = parse_attack_kind(text(a.at("kind"), "faults.attack.kind"));
    if (a.contains("channels")) f.attack.channels = to_indices(a.at("channels"), "faults.attack.channels");
    if (a.contains("amplitude")) f.attack.amplitude = number(a.at("amplitude"), "faults.attack.amplitude");
    if (a.contains("slope")) f.attack.slope = number(a.at("slope"), "faults.attack.slope");
    if (a.contains("start_time")) f.attack.start_time = number(a.at("start_time"), "faults.attack.start_time");
  }
  if (b.contains("failure_schedule")) {
    const json& fs = b.at("failure_schedule");
    if (!fs.is_array()) fail("faults.failure_schedule must be an array");
    f.failure_schedule.clear();
    for (const auto& e : fs) {
      check_keys(e, "faults.failure_schedule[]", {"t_start", "effectiveness"});
      if (!e.contains("t_start") || !e.contains("effectiveness")) {
        fail("failure_schedule entries need t_start and effectiveness");
      }
      f.failure_schedule.push_back({number(e.at("t_start"), "failure_schedule.t_start"),
                                    to_mat(e.at("effectiveness"), "failure_schedule.effectiveness")});
    }
  }
}

Barrier parse_barrier(const json& e) {
  check_keys(e, "barriers[]", {"kind", "name", "a", "b", "phi", "center", "num_vars", "terms"});
  const std::string kind = e.contains("kind") ? text(e.at("kind"), "barrier kind") : "half_plane";
  const std::string name = e.contains("name") ? text(e.at("name"), "barrier name") : "";
  if (kind == "half_plane") {
    if (!e.contains("a")) fail("half_plane barrier needs 'a'");
    return Barrier::half_plane(to_vec(e.at("a"), "barrier.a"), e.contains("b") ? number(e.at("b"), "barrier.b") : 0.0,
                               name);
  }
  if (kind == "ellipsoid") {
    if (!e.contains("phi") || !e.contains("center")) fail("ellipsoid barrier needs 'phi' and 'center'");
    return Barrier::ellipsoid(to_mat(e.at("phi"), "barrier.phi"), to_vec(e.at("center"), "barrier.center"), name);
  }
  if (kind == "polynomial") {
    if (!e.contains("num_vars") || !e.contains("terms")) fail("polynomial barrier needs 'num_vars' and 'terms'");
    Polynomial p(integer(e.at("num_vars"), "barrier.num_vars"));
    for (const auto& t : e.at("terms")) {
      check_keys(t, "barrier.terms[]", {"powers", "coeff"});
      const IndexSet pw = to_indices(t.at("powers"), "barrier.terms.powers");
      if (static_cast<int>(pw.size()) != p.num_vars()) fail("polynomial term powers must have num_vars entries");
      p.add_term(pw, number(t.at("coeff"), "barrier.terms.coeff"));
    }
    return Barrier::polynomial(p, name);
  }
  fail("unknown barrier kind '" + kind + "'");
}

json barrier_json(const Barrier& b) {
  json j;
  j["name"] = b.name;
  switch (b.kind) {
    case BarrierKind::half_plane:
      j["kind"] = "half_plane";
      j["a"] = from_vec(b.a);
      j["b"] = b.b;
      break;
    case BarrierKind::ellipsoid:
      j["kind"] = "ellipsoid";
      j["phi"] = from_mat(b.phi);
      j["center"] = from_vec(b.center);
      break;
    case BarrierKind::polynomial: {
      j["kind"] = "polynomial";
      j["num_vars"] = b.poly.num_vars();
      json terms = json::array();
      for (const auto& [exps, coeff] : b.poly.terms()) terms.push_back({{"powers", exps}, {"coeff", coeff}});
      j["terms"] = terms;
      break;
    }
  }
  return j;
}

void parse_clf(const json& b, Scenario& s) {
  if (b.is_null()) {
    s.goal.reset();
    return;
  }
  check_keys(b, "clf", {"x_goal", "radius", "dims", "Psi", "F_cl", "v_bar", "theta_bar", "box_radius", "decay"});
  GoalSpec g = s.goal.value_or(GoalSpec{});
  if (b.contains("x_goal")) g.x_goal = to_vec(b.at("x_goal"), "clf.x_goal");
  if (b.contains("radius")) g.radius = number(b.at("radius"), "clf.radius");
  if (b.contains("dims")) g.dims = to_indices(b.at("dims"), "clf.dims");
  if (b.contains("Psi")) g.Psi = to_mat(b.at("Psi"), "clf.Psi");
  if (b.contains("F_cl")) g.F_cl = to_mat(b.at("F_cl"), "clf.F_cl");
  if (b.contains("v_bar")) {
    g.v_bar = b.at("v_bar").is_null() ? std::nullopt : std::optional<double>(number(b.at("v_bar"), "clf.v_bar"));
  }
  if (b.contains("theta_bar")) {
    g.theta_bar =
        b.at("theta_bar").is_null() ? std::nullopt : std::optional<double>(number(b.at("theta_bar"), "clf.theta_bar"));
  }
  if (b.contains("box_radius")) g.box_radius = number(b.at("box_radius"), "clf.box_radius");
  if (b.contains("decay")) g.decay = boolean(b.at("decay"), "clf.decay");
  if (g.x_goal.size() == 0) fail("clf.x_goal is required");
  s.goal = g;
}

void parse_policy(const json& b, Scenario& s) {
  check_keys(b, "policy", {"mode", "delta", "kappa", "baseline_gamma", "R", "admissible_input", "actuator_patterns",
                           "nominal", "nominal_Q", "nominal_R", "input_limit"});
  PolicyConfig& p = s.policy;
  if (b.contains("mode")) {
    try {
      p.mode = parse_policy_mode(text(b.at("mode"), "policy.mode"));
    } catch (const ContractViolation& e) {
      fail(e.what());
    }
  }
  if (b.contains("delta")) p.delta = number_or_inf(b.at("delta"), "policy.delta");
  if (b.contains("kappa")) p.kappa = number(b.at("kappa"), "policy.kappa");
  if (b.contains("baseline_gamma")) p.baseline_gamma = number(b.at("baseline_gamma"), "policy.baseline_gamma");
  if (b.contains("R")) p.R = to_mat(b.at("R"), "policy.R");
  if (b.contains("admissible_input")) p.admissible_input = number_or_inf(b.at("admissible_input"), "policy.admissible_input");
  if (b.contains("actuator_patterns")) {
    const json& a = b.at("actuator_patterns");
    if (!a.is_array()) fail("policy.actuator_patterns must be an array of matrices");
    s.actuator_patterns.clear();
    for (const auto& e : a) s.actuator_patterns.push_back(to_mat(e, "policy.actuator_patterns"));
  }
  if (b.contains("nominal")) {
    const std::string k = text(b.at("nominal"), "policy.nominal");
    if (k == "zero") {
      s.nominal = NominalKind::zero;
    } else if (k == "lqr") {
      s.nominal = NominalKind::lqr;
    } else {
      fail("policy.nominal must be 'zero' or 'lqr'");
    }
  }
  if (b.contains("nominal_Q")) s.nominal_Q = to_mat(b.at("nominal_Q"), "policy.nominal_Q");
  if (b.contains("nominal_R")) s.nominal_R = to_mat(b.at("nominal_R"), "policy.nominal_R");
  if (b.contains("input_limit")) {
    s.input_limit = b.at("input_limit").is_null() ? Vec() : to_vec(b.at("input_limit"), "policy.input_limit");
  }
}

GainMode parse_gain_mode(const std::string& k) {
  if (k == "constant_gain") return GainMode::constant_gain;
  if (k == "riccati_ode") return GainMode::riccati_ode;
  if (k == "open_loop") return GainMode::open_loop;
  fail("unknown estimator mode '" + k + "'");
}

std::string gain_mode_name(GainMode m) {
  switch (m) {
    case GainMode::constant_gain: return "constant_gain";
    case GainMode::riccati_ode: return "riccati_ode";
    case GainMode::open_loop: return "open_loop";
  }
  return "constant_gain";
}

void parse_blocks(const json& doc, Scenario& s) {
  check_keys(doc, "document", {"preset", "name", "model", "faults", "barriers", "clf", "policy", "sim", "estimator",
                               "calibration", "chain", "verify", "seeds", "wmr_compensator"});
  if (doc.contains("name")) s.name = text(doc.at("name"), "name");
  if (doc.contains("model")) parse_model(doc.at("model"), s);
  if (doc.contains("faults")) parse_faults(doc.at("faults"), s);
  if (doc.contains("barriers")) {
    const json& bs = doc.at("barriers");
    if (!bs.is_array()) fail("barriers must be an array");
    s.barriers.clear();
    for (const auto& e : bs) s.barriers.push_back(parse_barrier(e));
  }
  if (doc.contains("clf")) parse_clf(doc.at("clf"), s);
  if (doc.contains("policy")) parse_policy(doc.at("policy"), s);
  if (doc.contains("sim")) {
    const json& b = doc.at("sim");
    check_keys(b, "sim", {"dt", "horizon", "x0"});
    if (b.contains("dt")) s.sim.dt = number(b.at("dt"), "sim.dt");
    if (b.contains("horizon")) s.sim.horizon = number(b.at("horizon"), "sim.horizon");
    if (b.contains("x0")) s.sim.x0 = to_vec(b.at("x0"), "sim.x0");
  }
  if (doc.contains("estimator")) {
    const json& b = doc.at("estimator");
    check_keys(b, "estimator", {"mode", "p0_scale", "residue_smoothing", "design_sigma", "design_nu"});
    EstimatorOptions& e = s.estimator;
    if (b.contains("mode")) e.mode = parse_gain_mode(text(b.at("mode"), "estimator.mode"));
    if (b.contains("p0_scale")) e.p0_scale = number(b.at("p0_scale"), "estimator.p0_scale");
    if (b.contains("residue_smoothing")) e.residue_smoothing = number(b.at("residue_smoothing"), "estimator.residue_smoothing");
    if (b.contains("design_sigma")) e.design_sigma = to_mat(b.at("design_sigma"), "estimator.design_sigma");
    if (b.contains("design_nu")) e.design_nu = to_mat(b.at("design_nu"), "estimator.design_nu");
  }
  if (doc.contains("calibration")) {
    const json& b = doc.at("calibration");
    check_keys(b, "calibration", {"n_runs", "epsilon", "horizon", "seed", "gammas", "thetas"});
    CalibrationSettings& c = s.calibration;
    if (b.contains("n_runs")) c.n_runs = integer(b.at("n_runs"), "calibration.n_runs");
    if (b.contains("epsilon")) c.epsilon = number(b.at("epsilon"), "calibration.epsilon");
    if (b.contains("horizon")) c.horizon = number(b.at("horizon"), "calibration.horizon");
    if (b.contains("seed")) c.seed = unsigned_integer(b.at("seed"), "calibration.seed");
    if (b.contains("gammas")) {
      s.gammas = b.at("gammas").is_null() ? std::nullopt : std::optional<Vec>(to_vec(b.at("gammas"), "calibration.gammas"));
    }
    if (b.contains("thetas")) {
      s.thetas = b.at("thetas").is_null() ? std::nullopt : std::optional<Mat>(to_mat(b.at("thetas"), "calibration.thetas"));
    }
  }
  if (doc.contains("chain")) {
    const json& b = doc.at("chain");
    check_keys(b, "chain", {"max_degree", "allow_degenerate", "box_lo", "box_hi", "offset_samples", "offset_seed"});
    ChainOptions& c = s.chain;
    if (b.contains("max_degree")) c.max_degree = integer(b.at("max_degree"), "chain.max_degree");
    if (b.contains("allow_degenerate")) c.allow_degenerate = boolean(b.at("allow_degenerate"), "chain.allow_degenerate");
    if (b.contains("box_lo")) c.box_lo = to_vec(b.at("box_lo"), "chain.box_lo");
    if (b.contains("box_hi")) c.box_hi = to_vec(b.at("box_hi"), "chain.box_hi");
    if (b.contains("offset_samples")) c.offset_samples = integer(b.at("offset_samples"), "chain.offset_samples");
    if (b.contains("offset_seed")) c.offset_seed = unsigned_integer(b.at("offset_seed"), "chain.offset_seed");
  }
  if (doc.contains("verify")) {
    const json& b = doc.at("verify");
    check_keys(b, "verify", {"box_lo", "box_hi", "seed", "boundary_fraction"});
    VerifySettings& v = s.verify;
    if (b.contains("box_lo")) v.box_lo = to_vec(b.at("box_lo"), "verify.box_lo");
    if (b.contains("box_hi")) v.box_hi = to_vec(b.at("box_hi"), "verify.box_hi");
    if (b.contains("seed")) v.seed = unsigned_integer(b.at("seed"), "verify.seed");
    if (b.contains("boundary_fraction")) v.boundary_fraction = number(b.at("boundary_fraction"), "verify.boundary_fraction");
  }
  if (doc.contains("seeds")) {
    const json& b = doc.at("seeds");
    if (!b.is_array()) fail("seeds must be an array");
    s.seeds.clear();
    for (const auto& e : b) s.seeds.push_back(unsigned_integer(e, "seeds"));
  }
  if (doc.contains("wmr_compensator")) s.wmr_compensator = boolean(doc.at("wmr_compensator"), "wmr_compensator");
}

}  // namespace

Scenario scenario_from_json_text(const std::string& text_in) {
  json doc;
  try {
    doc = json::parse(text_in);
  } catch (const json::parse_error& e) {
    fail(std::string("parse error: ") + e.what());
  }
  if (!doc.is_object()) fail("top level must be an object");
  Scenario s;
  if (doc.contains("preset")) {
    const std::string p = text(doc.at("preset"), "preset");
    if (p == "wmr") {
      s = build_wmr_scenario();
    } else if (p == "boeing") {
      s = build_boeing_scenario();
    } else {
      fail("unknown preset '" + p + "' (expected 'wmr' or 'boeing')");
    }
  } else if (!doc.contains("model")) {
    fail("either a 'preset' or a 'model' block is required");
  }
  try {
    parse_blocks(doc, s);
  } catch (const json::exception& e) {
    fail(e.what());
  }
  if (s.policy.R.size() == 0) s.policy.R = Mat::Identity(s.model.p, s.model.p);
  if (s.sim.x0.size() == 0) s.sim.x0 = Vec::Zero(s.model.n);
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioValidationError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json_text(ss.str());
}

std::string scenario_to_json_text(const Scenario& s) {
  require(s.model.is_linear, "scenario_to_json_text: only linear models can be written");
  json doc;
  doc["name"] = s.name;
  doc["model"] = {{"F", from_mat(s.model.F)},
                  {"G", from_mat(s.model.G)},
                  {"c", from_mat(s.model.c)},
                  {"sigma", from_mat(s.model.sigma)},
                  {"nu", from_mat(s.model.nu)}};
  json fs = json::array();
  for (const auto& e : s.faults.failure_schedule) {
    fs.push_back({{"t_start", e.t_start}, {"effectiveness", from_mat(e.effectiveness)}});
  }
  doc["faults"] = {{"sensor_patterns", s.faults.sensor_patterns},
                   {"active_sensor_fault", opt_number(s.faults.active_sensor_fault)},
                   {"attack",
                    {{"kind", attack_kind_name(s.faults.attack.kind)},
                     {"channels", s.faults.attack.channels},
                     {"amplitude", s.faults.attack.amplitude},
                     {"slope", s.faults.attack.slope},
                     {"start_time", s.faults.attack.start_time}}},
                   {"failure_schedule", fs}};
  json bs = json::array();
  for (const auto& b : s.barriers) bs.push_back(barrier_json(b));
  doc["barriers"] = bs;
  if (s.goal) {
    const GoalSpec& g = *s.goal;
    doc["clf"] = {{"x_goal", from_vec(g.x_goal)}, {"radius", g.radius},      {"dims", g.dims},
                  {"Psi", from_mat(g.Psi)},        {"F_cl", from_mat(g.F_cl)}, {"v_bar", opt_number(g.v_bar)},
                  {"theta_bar", opt_number(g.theta_bar)}, {"box_radius", g.box_radius}, {"decay", g.decay}};
  }
  json pats = json::array();
  for (const auto& l : s.actuator_patterns) pats.push_back(from_mat(l));
  doc["policy"] = {{"mode", to_string(s.policy.mode)},
                   {"delta", inf_or_number(s.policy.delta)},
                   {"kappa", s.policy.kappa},
                   {"baseline_gamma", s.policy.baseline_gamma},
                   {"R", from_mat(s.policy.R)},
                   {"admissible_input", inf_or_number(s.policy.admissible_input)},
                   {"actuator_patterns", pats},
                   {"nominal", s.nominal == NominalKind::lqr ? "lqr" : "zero"},
                   {"nominal_Q", from_mat(s.nominal_Q)},
                   {"nominal_R", from_mat(s.nominal_R)},
                   {"input_limit", from_vec(s.input_limit)}};
  doc["sim"] = {{"dt", s.sim.dt}, {"horizon", s.sim.horizon}, {"x0", from_vec(s.sim.x0)}};
  doc["estimator"] = {{"mode", gain_mode_name(s.estimator.mode)},
                      {"p0_scale", s.estimator.p0_scale},
                      {"residue_smoothing", s.estimator.residue_smoothing},
                      {"design_sigma", from_mat(s.estimator.design_sigma)},
                      {"design_nu", from_mat(s.estimator.design_nu)}};
  doc["calibration"] = {{"n_runs", s.calibration.n_runs},
                        {"epsilon", s.calibration.epsilon},
                        {"horizon", s.calibration.horizon},
                        {"seed", s.calibration.seed},
                        {"gammas", s.gammas ? from_vec(*s.gammas) : json(nullptr)},
                        {"thetas", s.thetas ? from_mat(*s.thetas) : json(nullptr)}};
  doc["chain"] = {{"max_degree", s.chain.max_degree},
                  {"allow_degenerate", s.chain.allow_degenerate},
                  {"box_lo", from_vec(s.chain.box_lo)},
                  {"box_hi", from_vec(s.chain.box_hi)},
                  {"offset_samples", s.chain.offset_samples},
                  {"offset_seed", s.chain.offset_seed}};
  doc["verify"] = {{"box_lo", from_vec(s.verify.box_lo)},
                   {"box_hi", from_vec(s.verify.box_hi)},
                   {"seed", s.verify.seed},
                   {"boundary_fraction", s.verify.boundary_fraction}};
  doc["seeds"] = s.seeds;
  doc["wmr_compensator"] = s.wmr_compensator;
  return doc.dump(2) + "\n";
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << scenario_to_json_text(s);
}

std::string metrics_json(const Scenario& s, const std::vector<RunSummary>& runs) {
  json doc;
  doc["scenario"] = s.name;
  doc["mode"] = to_string(s.policy.mode);
  json seeds = json::array();
  json min_h = json::array();
  json reach = json::array();
  json per_run = json::array();
  int violations = 0;
  int reached = 0;
  double reach_sum = 0.0;
  double worst = inf();
  for (const auto& r : runs) {
    seeds.push_back(r.seed);
    min_h.push_back(r.min_h);
    reach.push_back(opt_number(r.reach_time));
    if (r.min_h < 0.0) ++violations;
    worst = std::min(worst, r.min_h);
    if (r.reach_time) {
      ++reached;
      reach_sum += *r.reach_time;
    }
    per_run.push_back({{"seed", r.seed},
                       {"min_h", r.min_h},
                       {"first_violation_step", r.first_violation_step},
                       {"goal_reach_time", opt_number(r.reach_time)},
                       {"final_norm", r.final_norm},
                       {"infeasible_steps", r.infeasible_steps},
                       {"step2_steps", r.step2_steps},
                       {"step3_steps", r.step3_steps},
                       {"removal_counts", r.removal_counts},
                       {"compensator_clamps", r.compensator_clamps}});
  }
  const auto n = static_cast<double>(runs.size());
  doc["seeds"] = seeds;
  doc["safety_violations"] = violations;
  doc["safety_rate"] = runs.empty() ? json(nullptr) : json((n - violations) / n);
  doc["min_h"] = min_h;
  doc["worst_min_h"] = runs.empty() ? json(nullptr) : json(worst);
  doc["goal_reach_time"] = reach;
  doc["reach_count"] = reached;
  doc["mean_reach_time"] = reached ? json(reach_sum / reached) : json(nullptr);
  doc["runs"] = per_run;
  return doc.dump(2) + "\n";
}

std::string calibration_json(const Calibration& cal, int n_runs, double epsilon) {
  json doc;
  doc["calibration"] = {{"gammas", from_vec(cal.gammas)},
                        {"thetas", from_mat(cal.thetas)},
                        {"n_runs", n_runs},
                        {"epsilon", epsilon}};
  return doc.dump(2) + "\n";
}

std::string report_json(const VerificationReport& rep) {
  json doc;
  doc["mode"] = rep.mode;
  doc["checked_conditions"] = rep.checked_conditions;
  doc["budget"] = rep.budget;
  doc["samples"] = rep.samples;
  doc["skipped"] = rep.skipped;
  doc["seeds"] = {rep.seed};
  doc["box"] = {{"lo", from_vec(rep.box_lo)}, {"hi", from_vec(rep.box_hi)}};
  doc["statement"] = rep.statement();
  doc["notes"] = rep.notes;
  if (rep.counterexample) {
    const Counterexample& c = *rep.counterexample;
    json est = json::array();
    for (const auto& e : c.estimates) est.push_back(from_vec(e));
    json z = json::array();
    for (const auto& e : c.z) z.push_back(from_vec(e));
    json rows = json::array();
    for (const auto& r : c.rows) rows.push_back({{"tag", r.tag()}, {"row", from_vec(r.row)}, {"bound", r.bound}});
    doc["counterexample"] = {{"sample", c.sample}, {"x", from_vec(c.x)}, {"estimates", est},
                             {"z", z},             {"rows", rows},       {"certificate", from_vec(c.certificate)}};
  } else {
    doc["counterexample"] = nullptr;
  }
  return doc.dump(2) + "\n";
}

}  // namespace ftcbf
