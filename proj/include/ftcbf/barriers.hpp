#pragma once

#include "ftcbf/estimator_bank.hpp"
#include "ftcbf/polynomial.hpp"
#include "ftcbf/simulator.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ftcbf {

enum class BarrierKind { half_plane, ellipsoid, polynomial };

/// Safe set {x : h(x) >= 0}.
struct Barrier {
  BarrierKind kind = BarrierKind::half_plane;
  std::string name;
  Vec a;
  double b = 0.0;
  Mat phi;
  Vec center;
  Polynomial poly;

  /// h(x) = a^T x + b
  static Barrier half_plane(const Vec& a, double b, std::string name = {});
  /// h(x) = 1 - (x - center)^T phi (x - center)
  static Barrier ellipsoid(const Mat& phi, const Vec& center, std::string name = {});
  static Barrier polynomial(const Polynomial& p, std::string name = {});

  int num_vars() const;
  Polynomial as_polynomial() const;
};

struct ChainOptions {
  int max_degree = 8;
  /// Return a chain with no input authority instead of throwing.
  bool allow_degenerate = false;
  /// Operating box used to bound gradients of non-affine chain members.
  Vec box_lo;
  Vec box_hi;
  int offset_samples = 2048;
  std::uint64_t offset_seed = 11;
};

/// h^0 ... h^{d'} with
///   h^{d+1} = dh^d/dx f + 1/2 tr(sigma^T d2h^d/dx2 sigma) + h^d.
struct BarrierChain {
  Barrier barrier;
  std::vector<Polynomial> chain;
  /// Closed-form coefficients when every member is affine.
  std::vector<Vec> affine_a;
  std::vector<double> affine_b;
  int relative_degree = 0;
  /// False when no member up to max_degree is actuated (degenerate chain).
  bool actuated = true;
  /// Effectiveness mask used when the relative degree was determined.
  Mat input_mask;
  /// Per-member bounds used by gamma_offset: max ||grad h^d|| and max ||hess h^d||.
  std::vector<double> grad_bound;
  std::vector<double> hess_bound;

  bool is_affine() const { return !affine_a.empty(); }
  int top() const { return relative_degree; }
  double value(int d, const Vec& x) const;
  Vec gradient(int d, const Vec& x) const;
  Mat hessian(int d, const Vec& x) const;
  /// sup of h^d over a gamma-ball centred on its zero set.
  double gamma_offset(int d, double gamma) const;
  /// h^d(x) - gamma_offset(d, gamma)
  double shrunk(int d, const Vec& x, double gamma) const;
};

/// Builds the chain up to the smallest d with dh^d/dx g L not identically zero.
/// Throws UncontrollableBarrierError when no such d <= max_degree exists.
BarrierChain build_chain(const Barrier& h, const SystemModel& model, const ChainOptions& opts = {},
                         const Mat& input_mask = Mat());

enum class RowSource { scbf, hoscbf, clf, af_cbf, af_hocbf, input_limit };

/// row . u >= bound
struct ConstraintRow {
  Vec row;
  double bound = 0.0;
  RowSource source = RowSource::hoscbf;
  /// Estimator index for sensor rows, pattern index for actuator rows, input index for limits.
  int index = 0;
  /// Barrier index within the scenario.
  int barrier = 0;

  std::string tag() const;
};

/// Robust SCBF row for a relative-degree-0 chain at the estimator's state.
ConstraintRow scbf_row(const BarrierChain& chain, const EstimatorState& est, const SystemModel& model,
                       double gamma, int index = 0);

/// Robust HOSCBF row on h^{d'}: the unknown z-term is replaced by its worst case
/// -gamma ||dh^{d'}/dx K c_bar|| over the gamma-ball.
ConstraintRow hoscbf_row(const BarrierChain& chain, const EstimatorState& est,
                         const SystemModel& model, double gamma, int index = 0);

/// One row per failure pattern at the true state:
///   dh^{d'_j}/dx g L_j u >= -kappa h^{d'_j} - dh^{d'_j}/dx f - 1/2 tr(sigma^T H sigma).
/// chains[j] must have been built with input_mask = patterns[j].
std::vector<ConstraintRow> af_rows(const std::vector<BarrierChain>& chains, const Vec& x,
                                   const std::vector<Mat>& patterns, const SystemModel& model,
                                   double kappa = 1.0, int barrier = 0);

/// Per-pattern chains; a pattern that leaves the barrier unactuated raises
/// RedundancyViolationError.
std::vector<BarrierChain> build_pattern_chains(const Barrier& h, const SystemModel& model,
                                               const std::vector<Mat>& patterns,
                                               const ChainOptions& opts = {});

/// Fraction of samples where dh^d/dx g(x) u < 0 for some d < d' and a random
/// unit u. Always zero for chains whose lower members are identically unactuated.
double lower_order_input_violation(const BarrierChain& chain, const SystemModel& model,
                                   int samples, std::uint64_t seed);

}  // namespace ftcbf
