#pragma once

#include "ftcbf/runner.hpp"
#include "ftcbf/scenarios.hpp"
#include "ftcbf/verifier.hpp"

#include <string>
#include <vector>

namespace ftcbf {

/// Scenario document: blocks model, faults, barriers, clf, policy, sim,
/// estimator, calibration, chain, verify, seeds. An optional "preset"
/// ("wmr" or "boeing") supplies the defaults that the blocks then override.
/// Throws ScenarioValidationError on malformed or contradictory input.
Scenario scenario_from_json_text(const std::string& text);
Scenario load_scenario(const std::string& path);

/// Full document with every block written out (no preset).
std::string scenario_to_json_text(const Scenario& s);
void save_scenario(const Scenario& s, const std::string& path);

/// {safety_violations, safety_rate, min_h, goal_reach_time, mean_reach_time, runs: [...]}
std::string metrics_json(const Scenario& s, const std::vector<RunSummary>& runs);

/// {"calibration": {gammas, thetas, n_runs, epsilon}}, mergeable into a scenario file.
std::string calibration_json(const Calibration& cal, int n_runs, double epsilon);

/// {checked_conditions, samples, counterexample, seeds, ...}
std::string report_json(const VerificationReport& rep);

}  // namespace ftcbf
