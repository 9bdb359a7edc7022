#pragma once

#include "ftcbf/barriers.hpp"
#include "ftcbf/estimator_bank.hpp"
#include "ftcbf/optimizer.hpp"
#include "ftcbf/runner.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ftcbf {

/// Single-estimator check. With the top chain member actuated at xhat the
/// condition can always be met; otherwise the input-free margin
///   xi(xhat, z) = shrunk h^{d'} + dh/dx f + 1/2 tr(...) + dh/dx K c_bar z
/// must stay nonnegative for every z on the gamma-sphere.
struct ScbfCheck {
  bool feasible = true;
  bool actuated = true;
  /// min over ||z|| = gamma of xi; +inf when actuated.
  double xi = 0.0;
  std::optional<Vec> z;
};

ScbfCheck verify_scbf_pointwise(const BarrierChain& chain, const SystemModel& model,
                                const EstimatorState& est, double gamma);

/// Barrier row for one estimate with a realised error z instead of the worst case.
ConstraintRow realised_row(const BarrierChain& chain, const SystemModel& model,
                           const EstimatorState& est, double gamma, const Vec& z, int index,
                           int barrier);

struct RowSetCheck {
  bool feasible = true;
  /// True when the estimates violate a pairwise bound; nothing is checked then.
  bool vacuous = false;
  std::vector<ConstraintRow> rows;
  std::optional<Vec> certificate;
};

/// Farkas test of row . u >= bound over a row set.
RowSetCheck check_rows(const std::vector<ConstraintRow>& rows, int p);

/// All (estimator, barrier) rows at the given estimates and realised errors.
/// estimates[i] carries the i-th estimator's gain and state.
RowSetCheck verify_ft_set_pointwise(const std::vector<BarrierChain>& chains,
                                    const SystemModel& model,
                                    const std::vector<EstimatorState>& estimates,
                                    const std::vector<Vec>& z, const Vec& gammas,
                                    const Mat& thetas);

/// Every (barrier, failure pattern) row at the true state x.
RowSetCheck verify_actuator_pointwise(const std::vector<std::vector<BarrierChain>>& pattern_chains,
                                      const std::vector<Mat>& patterns, const SystemModel& model,
                                      const Vec& x, double kappa);

struct SamplerOptions {
  std::uint64_t seed = 1;
  /// Operating box; [-1, 1]^n when empty.
  Vec box_lo;
  Vec box_hi;
  /// Share of samples projected onto a binding surface (shrunk top member = 0).
  double boundary_fraction = 0.25;
  /// Box draws per accepted safe-set sample in actuator mode.
  int max_rejections = 10000;
  int threads = 0;
};

struct Counterexample {
  long sample = 0;
  Vec x;
  std::vector<Vec> estimates;
  std::vector<Vec> z;
  std::vector<ConstraintRow> rows;
  Vec certificate;
};

struct VerificationReport {
  std::string mode;
  std::vector<std::string> checked_conditions;
  long budget = 0;
  /// Samples evaluated (all of them unless a counterexample stopped the search).
  long samples = 0;
  /// Actuator-mode draws that found no safe point within max_rejections.
  long skipped = 0;
  std::optional<Counterexample> counterexample;
  std::uint64_t seed = 0;
  Vec box_lo;
  Vec box_hi;
  std::vector<std::string> notes;

  /// "no counterexample in N samples" or the sample index of the counterexample.
  std::string statement() const;
};

/// Randomised search for a point where the scenario's constraint set is empty.
/// Sensor modes sample estimates within the pairwise theta bounds and errors
/// within the gamma balls; actuator mode samples the true state over the safe
/// set. The lowest-index counterexample wins, so the result does not depend on
/// the thread count.
VerificationReport falsify_region(const PreparedScenario& ps, long budget,
                                  const SamplerOptions& opts = {});

}  // namespace ftcbf
