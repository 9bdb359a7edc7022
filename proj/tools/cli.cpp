#include "cli.hpp"

#include "ftcbf/io.hpp"
#include "ftcbf/runner.hpp"
#include "ftcbf/verifier.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ftcbf {

namespace {

namespace fs = std::filesystem;

// "n" -> 1..n, "a,b,c" -> that list, "" or "0" -> none.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (text.empty()) return out;
  auto parse_one = [&](const std::string& tok) -> std::uint64_t {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || tok.empty() || tok[0] == '-') {
      throw ScenarioValidationError("--seeds: '" + tok + "' is not a nonnegative integer");
    }
    return v;
  };
  if (text.find(',') == std::string::npos) {
    const std::uint64_t n = parse_one(text);
    for (std::uint64_t k = 1; k <= n; ++k) out.push_back(k);
    return out;
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_one(tok));
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << content;
}

struct RunArgs {
  std::string scenario;
  std::string seeds;
  bool seeds_given = false;
  std::string out = "out";
  std::string mode;
  int threads = 0;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
  Scenario s = load_scenario(a.scenario);
  if (!a.mode.empty()) {
    s.policy.mode = parse_policy_mode(a.mode);
    s.validate();
  }
  const std::vector<std::uint64_t> seeds = a.seeds_given ? parse_seeds(a.seeds) : s.seeds;
  if (seeds.empty()) {
    out << "no seeds; nothing to run\n";
    return kExitOk;
  }
  const PreparedScenario ps = prepare(s);
  for (const auto& note : ps.notes) out << "note: " << note << '\n';
  const auto results = run_sweep(ps, seeds, true, a.threads);
  const fs::path dir(a.out);
  std::vector<RunSummary> summaries;
  for (const auto& r : results) {
    write_file(dir / ("seed_" + std::to_string(r.summary.seed) + ".csv"), r.csv);
    summaries.push_back(r.summary);
  }
  write_file(dir / "metrics.json", metrics_json(s, summaries));
  int safe = 0;
  int reached = 0;
  for (const auto& r : summaries) {
    safe += r.min_h >= 0.0 ? 1 : 0;
    reached += r.reach_time ? 1 : 0;
  }
  out << s.name << " [" << to_string(s.policy.mode) << "]: " << safe << "/" << summaries.size() << " safe";
  if (s.goal) out << ", " << reached << "/" << summaries.size() << " reached the goal";
  out << "; outputs in " << dir.string() << '\n';
  return kExitOk;
}

int cmd_calibrate(const std::string& scenario, int runs, double epsilon, const std::string& out_path,
                  std::ostream& out) {
  if (runs < 50) throw ScenarioValidationError("--runs must be at least 50");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ScenarioValidationError("--epsilon must lie in (0, 1)");
  const Scenario s = load_scenario(scenario);
  const Calibration cal = calibrate_scenario(s, runs, epsilon);
  write_file(out_path, calibration_json(cal, runs, epsilon));
  out << "gammas:";
  for (Eigen::Index i = 0; i < cal.gammas.size(); ++i) out << ' ' << format_double(cal.gammas(i));
  out << "\nwritten to " << out_path << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& scenario, long budget, const std::string& out_path, std::optional<std::uint64_t> seed,
               int threads, std::ostream& out) {
  if (budget <= 0) throw ScenarioValidationError("--budget must be positive");
  const Scenario s = load_scenario(scenario);
  const PreparedScenario ps = prepare(s);
  SamplerOptions o;
  o.seed = seed.value_or(s.verify.seed);
  o.box_lo = s.verify.box_lo;
  o.box_hi = s.verify.box_hi;
  o.boundary_fraction = s.verify.boundary_fraction;
  o.threads = threads;
  const VerificationReport rep = falsify_region(ps, budget, o);
  write_file(out_path, report_json(rep));
  out << s.name << ": " << rep.statement() << '\n';
  if (!rep.counterexample) return kExitOk;
  const Counterexample& c = *rep.counterexample;
  out << "counterexample x =";
  for (Eigen::Index i = 0; i < c.x.size(); ++i) out << ' ' << format_double(c.x(i));
  out << '\n';
  for (std::size_t i = 0; i < c.estimates.size(); ++i) {
    out << "  xhat" << i << " =";
    for (Eigen::Index k = 0; k < c.estimates[i].size(); ++k) out << ' ' << format_double(c.estimates[i](k));
    out << '\n';
  }
  return kExitCounterexample;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fault-tolerant safe control toolkit"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Simulate a scenario over a list of seeds");
  run->add_option("--scenario", ra.scenario, "Scenario file")->required();
  auto* seeds_opt = run->add_option("--seeds", ra.seeds, "Seed count n (seeds 1..n) or comma-separated list");
  run->add_option("--out", ra.out, "Output directory");
  run->add_option("--mode", ra.mode, "Override the policy mode");
  run->add_option("--threads", ra.threads, "Worker threads (0 = hardware)");

  std::string cal_scenario;
  int cal_runs = 200;
  double cal_eps = 0.05;
  std::string cal_out = "calibration.json";
  auto* cal = app.add_subcommand("calibrate", "Estimate gamma and theta by attack-free Monte Carlo");
  cal->add_option("--scenario", cal_scenario, "Scenario file")->required();
  cal->add_option("--runs", cal_runs, "Monte Carlo runs (>= 50)");
  cal->add_option("--epsilon", cal_eps, "Miss probability");
  cal->add_option("--out", cal_out, "Output JSON path");

  std::string ver_scenario;
  long ver_budget = 10000;
  std::string ver_out = "verification.json";
  std::optional<std::uint64_t> ver_seed;
  int ver_threads = 0;
  auto* ver = app.add_subcommand("verify", "Search for points where the constraint set is empty");
  ver->add_option("--scenario", ver_scenario, "Scenario file")->required();
  ver->add_option("--budget", ver_budget, "Number of samples");
  ver->add_option("--out", ver_out, "Report path");
  ver->add_option("--seed", ver_seed, "Sampler seed (scenario value by default)");
  ver->add_option("--threads", ver_threads, "Worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*run) {
      ra.seeds_given = seeds_opt->count() > 0;
      return cmd_run(ra, out);
    }
    if (*cal) return cmd_calibrate(cal_scenario, cal_runs, cal_eps, cal_out, out);
    if (*ver) return cmd_verify(ver_scenario, ver_budget, ver_out, ver_seed, ver_threads, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace ftcbf
