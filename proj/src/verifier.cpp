#include "ftcbf/verifier.hpp"

#include "ftcbf/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace ftcbf {

namespace {

bool has_gain(const EstimatorState& est) { return !est.open_loop() && est.K.size() > 0; }

// dh/dx K c_bar as a column vector; zero without a gain.
Vec error_direction(const BarrierChain& chain, const EstimatorState& est, const Vec& xh) {
  const Vec grad = chain.gradient(chain.top(), xh);
  if (!has_gain(est)) return Vec::Zero(grad.size());
  return (grad.transpose() * est.K * est.c_bar).transpose();
}

Vec worst_error(const BarrierChain& chain, const EstimatorState& est, const Vec& xh, double gamma) {
  const Vec w = error_direction(chain, est, xh);
  const double nw = w.norm();
  if (nw <= 0.0 || gamma <= 0.0) return Vec::Zero(w.size());
  return -gamma * w / nw;
}

std::string barrier_label(const BarrierChain& c, int b) {
  return c.barrier.name.empty() ? "barrier " + std::to_string(b) : "barrier '" + c.barrier.name + "'";
}

double radical_inverse(long k, int base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (k > 0) {
    r += f * static_cast<double>(k % base);
    k /= base;
    f *= inv;
  }
  return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

// Shifted Halton point in the box.
Vec halton_point(long k, const Vec& shift, const Vec& lo, const Vec& hi) {
  const Eigen::Index n = lo.size();
  Vec x(n);
  for (Eigen::Index d = 0; d < n; ++d) {
    const int base = kPrimes[d % 16] + (d >= 16 ? 2 * static_cast<int>(d) : 0);
    double u = radical_inverse(k + 1, base) + shift(d);
    u -= std::floor(u);
    x(d) = lo(d) + u * (hi(d) - lo(d));
  }
  return x;
}

Vec uniform_ball(std::mt19937_64& rng, Eigen::Index n, double radius) {
  if (radius <= 0.0) return Vec::Zero(n);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  Vec v(n);
  for (Eigen::Index d = 0; d < n; ++d) v(d) = nd(rng);
  const double nv = v.norm();
  if (nv == 0.0) return Vec::Zero(n);
  return v / nv * radius * std::pow(ud(rng), 1.0 / static_cast<double>(n));
}

// Newton steps along the gradient towards {h^d(x) = level}.
Vec project_to_level(const BarrierChain& chain, int d, Vec x, double level) {
  for (int it = 0; it < 30; ++it) {
    const double r = chain.value(d, x) - level;
    const Vec g = chain.gradient(d, x);
    const double g2 = g.squaredNorm();
    if (g2 <= 1e-300) break;
    x -= r / g2 * g;
    if (std::abs(r) <= 1e-13 * std::max(1.0, std::abs(level))) break;
  }
  return x;
}

bool in_safe_set(const std::vector<BarrierChain>& chains, const Vec& x) {
  for (const auto& c : chains) {
    if (c.value(0, x) < 0.0) return false;
  }
  return true;
}

std::uint64_t sample_seed(std::uint64_t seed, long k) {
  const auto uk = static_cast<std::uint64_t>(k);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(uk), static_cast<std::uint32_t>(uk >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

ConstraintRow realised_row(const BarrierChain& chain, const SystemModel& model,
                           const EstimatorState& est, double gamma, const Vec& z, int index,
                           int barrier) {
  require(gamma >= 0.0, "realised_row: gamma must be nonnegative");
  const int d = chain.top();
  const Vec& xh = est.xhat;
  const Vec grad = chain.gradient(d, xh);
  ConstraintRow r;
  r.source = d == 0 ? RowSource::scbf : RowSource::hoscbf;
  r.index = index;
  r.barrier = barrier;
  r.row = (grad.transpose() * model.g(xh)).transpose();
  double margin = chain.shrunk(d, xh, gamma) + grad.dot(model.f(xh));
  if (has_gain(est)) {
    require(z.size() == xh.size(), "realised_row: z has wrong dimension");
    if (!chain.is_affine()) {
      const Mat kn = est.K * est.nu_bar;
      margin += 0.5 * (kn.transpose() * chain.hessian(d, xh) * kn).trace();
    }
    margin += error_direction(chain, est, xh).dot(z);
  }
  r.bound = -margin;
  return r;
}

ScbfCheck verify_scbf_pointwise(const BarrierChain& chain, const SystemModel& model,
                                const EstimatorState& est, double gamma) {
  ScbfCheck out;
  const Vec& xh = est.xhat;
  const Vec grad = chain.gradient(chain.top(), xh);
  const Vec gg = (grad.transpose() * model.g(xh)).transpose();
  if (gg.norm() > 1e-12 * std::max(1.0, grad.norm())) {
    out.xi = std::numeric_limits<double>::infinity();
    return out;
  }
  out.actuated = false;
  const Vec z = worst_error(chain, est, xh, gamma);
  out.xi = -realised_row(chain, model, est, gamma, z, 0, 0).bound;
  out.feasible = out.xi >= 0.0;
  if (!out.feasible) out.z = z;
  return out;
}

RowSetCheck check_rows(const std::vector<ConstraintRow>& rows, int p) {
  RowSetCheck out;
  out.rows = rows;
  Mat A;
  Vec Xi;
  to_farkas_form(rows, p, A, Xi);
  out.certificate = farkas_certificate(A, Xi);
  out.feasible = !out.certificate.has_value();
  return out;
}

RowSetCheck verify_ft_set_pointwise(const std::vector<BarrierChain>& chains,
                                    const SystemModel& model,
                                    const std::vector<EstimatorState>& estimates,
                                    const std::vector<Vec>& z, const Vec& gammas,
                                    const Mat& thetas) {
  const auto m = static_cast<int>(estimates.size());
  require(static_cast<int>(z.size()) == m && gammas.size() == m,
          "verify_ft_set_pointwise: one error and one gamma per estimate");
  if (thetas.size() > 0) {
    require(thetas.rows() == m && thetas.cols() == m, "verify_ft_set_pointwise: thetas must be m x m");
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        if ((estimates[i].xhat - estimates[j].xhat).norm() > thetas(i, j)) {
          RowSetCheck out;
          out.vacuous = true;
          return out;
        }
      }
    }
  }
  std::vector<ConstraintRow> rows;
  for (int i = 0; i < m; ++i) {
    for (std::size_t b = 0; b < chains.size(); ++b) {
      rows.push_back(realised_row(chains[b], model, estimates[i], gammas(i), z[i], i, static_cast<int>(b)));
    }
  }
  return check_rows(rows, model.p);
}

RowSetCheck verify_actuator_pointwise(const std::vector<std::vector<BarrierChain>>& pattern_chains,
                                      const std::vector<Mat>& patterns, const SystemModel& model,
                                      const Vec& x, double kappa) {
  std::vector<ConstraintRow> rows;
  for (std::size_t b = 0; b < pattern_chains.size(); ++b) {
    const auto r = af_rows(pattern_chains[b], x, patterns, model, kappa, static_cast<int>(b));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return check_rows(rows, model.p);
}

std::string VerificationReport::statement() const {
  std::ostringstream os;
  if (counterexample) {
    os << "counterexample at sample " << counterexample->sample << " (" << samples << " samples evaluated)";
  } else {
    os << "no counterexample in " << samples << " samples";
  }
  return os.str();
}

VerificationReport falsify_region(const PreparedScenario& ps, long budget, const SamplerOptions& opts) {
  require(budget > 0, "falsify_region: budget must be positive");
  const Scenario& s = ps.scen;
  const SystemModel& model = s.model;
  const int n = model.n;
  const bool actuator = !ps.pattern_chains.empty();
  const std::vector<Mat> patterns =
      s.policy.mode == PolicyMode::actuator_ft ? s.actuator_patterns
                                               : std::vector<Mat>{Mat::Identity(model.p, model.p)};
  const std::vector<EstimatorState>& singles = ps.bank.singles;
  require(actuator || !singles.empty(), "falsify_region: scenario has neither estimators nor actuator patterns");

  VerificationReport rep;
  rep.mode = actuator ? "actuator" : "sensor";
  rep.budget = budget;
  rep.seed = opts.seed;
  rep.box_lo = opts.box_lo.size() ? opts.box_lo : Vec::Constant(n, -1.0);
  rep.box_hi = opts.box_hi.size() ? opts.box_hi : Vec::Constant(n, 1.0);
  require(rep.box_lo.size() == n && rep.box_hi.size() == n && (rep.box_lo.array() <= rep.box_hi.array()).all(),
          "falsify_region: operating box must be n-dimensional with lo <= hi");
  if (budget < 10000) rep.notes.push_back("budget below the recommended 10000 samples");

  const int m = static_cast<int>(singles.size());
  const int nb = static_cast<int>(actuator ? ps.pattern_chains.size() : ps.chains.size());
  if (actuator) {
    for (int b = 0; b < nb; ++b) {
      for (std::size_t j = 0; j < patterns.size(); ++j) {
        rep.checked_conditions.push_back(barrier_label(ps.pattern_chains[b][j], b) + " under actuator pattern " +
                                         std::to_string(j));
      }
    }
    rep.checked_conditions.push_back("joint feasibility of all pattern rows at x in the safe set");
  } else {
    for (int b = 0; b < nb; ++b) {
      for (int i = 0; i < m; ++i) {
        rep.checked_conditions.push_back(barrier_label(ps.chains[b], b) + " for estimator " + singles[i].label() +
                                         " (order " + std::to_string(ps.chains[b].top()) + ")");
      }
    }
    rep.checked_conditions.push_back("joint feasibility of all estimator rows with ||z_i|| <= gamma_i");
    rep.notes.push_back("estimates are sampled within theta_ij of each other (the pairwise threshold, not gamma)");
  }

  const Vec gammas = actuator ? Vec() : (ps.bank.gammas.size() == m ? ps.bank.gammas : Vec::Zero(m));
  double radius = 0.0;
  if (!actuator && m > 1 && ps.bank.thetas.size() == m * m) {
    radius = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (i != j) radius = std::min(radius, ps.bank.thetas(i, j) / 2.0);
  }

  Vec shift(n);
  {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int d = 0; d < n; ++d) shift(d) = ud(rng);
  }

  struct Outcome {
    bool skipped = false;
    std::optional<Counterexample> cex;
  };

  auto evaluate = [&](long k) -> Outcome {
    Outcome o;
    std::mt19937_64 rng(sample_seed(opts.seed, k));
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const bool boundary = ud(rng) < opts.boundary_fraction;
    Vec x = halton_point(k, shift, rep.box_lo, rep.box_hi);

    if (actuator) {
      if (boundary) {
        const int b = std::min(nb - 1, static_cast<int>(ud(rng) * nb));
        const Vec y = project_to_level(ps.chains[b], 0, x, 0.0);
        if (in_safe_set(ps.chains, y)) x = y;
      }
      int tries = 0;
      while (!in_safe_set(ps.chains, x)) {
        if (++tries > opts.max_rejections) {
          o.skipped = true;
          return o;
        }
        for (int d = 0; d < n; ++d) x(d) = rep.box_lo(d) + ud(rng) * (rep.box_hi(d) - rep.box_lo(d));
      }
      RowSetCheck c = verify_actuator_pointwise(ps.pattern_chains, patterns, model, x, s.policy.kappa);
      if (!c.feasible) {
        Counterexample cex;
        cex.sample = k;
        cex.x = x;
        cex.rows = std::move(c.rows);
        cex.certificate = *c.certificate;
        o.cex = std::move(cex);
      }
      return o;
    }

    std::vector<EstimatorState> est = singles;
    std::vector<Vec> z(m);
    int anchor = -1;
    int bb = 0;
    if (boundary && nb > 0) {
      bb = std::min(nb - 1, static_cast<int>(ud(rng) * nb));
      anchor = std::min(m - 1, static_cast<int>(ud(rng) * m));
      const BarrierChain& c = ps.chains[bb];
      x = project_to_level(c, c.top(), x, c.gamma_offset(c.top(), gammas(anchor)));
    }
    for (int i = 0; i < m; ++i) {
      est[i].xhat = i == anchor ? x : Vec(x + uniform_ball(rng, n, radius));
    }
    for (int i = 0; i < m; ++i) {
      z[i] = boundary && nb > 0 ? worst_error(ps.chains[bb], est[i], est[i].xhat, gammas(i))
                                : uniform_ball(rng, n, gammas(i));
    }
    RowSetCheck c = verify_ft_set_pointwise(ps.chains, model, est, z, gammas, ps.bank.thetas);
    if (!c.feasible && !c.vacuous) {
      Counterexample cex;
      cex.sample = k;
      cex.x = x;
      for (const auto& e : est) cex.estimates.push_back(e.xhat);
      cex.z = z;
      cex.rows = std::move(c.rows);
      cex.certificate = *c.certificate;
      o.cex = std::move(cex);
    }
    return o;
  };

  std::vector<char> skipped(static_cast<std::size_t>(budget), 0);
  std::atomic<long> next{0};
  std::atomic<long> limit{budget};
  std::mutex mu;
  std::optional<Counterexample> best;
  std::exception_ptr failure;
  constexpr long kChunk = 64;

  auto worker = [&] {
    try {
      for (;;) {
        const long start = next.fetch_add(kChunk);
        if (start >= limit.load()) return;
        const long stop = std::min(start + kChunk, budget);
        for (long k = start; k < stop && k < limit.load(); ++k) {
          Outcome o = evaluate(k);
          if (o.skipped) skipped[static_cast<std::size_t>(k)] = 1;
          if (o.cex) {
            std::lock_guard<std::mutex> lock(mu);
            if (!best || k < best->sample) {
              best = std::move(o.cex);
              limit.store(k);
            }
            break;
          }
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!failure) failure = std::current_exception();
      limit.store(0);
    }
  };

  const int threads = std::max(1, std::min<int>(worker_count(opts.threads), static_cast<int>((budget + kChunk - 1) / kChunk)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  rep.samples = best ? best->sample + 1 : budget;
  for (long k = 0; k < rep.samples; ++k) rep.skipped += skipped[static_cast<std::size_t>(k)];
  rep.counterexample = std::move(best);
  return rep;
}

}  // namespace ftcbf
