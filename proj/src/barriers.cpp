#include "ftcbf/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace ftcbf {

Barrier Barrier::half_plane(const Vec& a, double b, std::string name) {
  Barrier h;
  h.kind = BarrierKind::half_plane;
  h.a = a;
  h.b = b;
  h.name = std::move(name);
  return h;
}

Barrier Barrier::ellipsoid(const Mat& phi, const Vec& center, std::string name) {
  require(phi.rows() == center.size() && phi.cols() == center.size(),
          "Barrier::ellipsoid: phi must be n x n");
  Barrier h;
  h.kind = BarrierKind::ellipsoid;
  h.phi = phi;
  h.center = center;
  h.name = std::move(name);
  return h;
}

Barrier Barrier::polynomial(const Polynomial& p, std::string name) {
  Barrier h;
  h.kind = BarrierKind::polynomial;
  h.poly = p;
  h.name = std::move(name);
  return h;
}

int Barrier::num_vars() const {
  switch (kind) {
    case BarrierKind::half_plane: return static_cast<int>(a.size());
    case BarrierKind::ellipsoid: return static_cast<int>(center.size());
    case BarrierKind::polynomial: return poly.num_vars();
  }
  return 0;
}

Polynomial Barrier::as_polynomial() const {
  switch (kind) {
    case BarrierKind::half_plane: return Polynomial::affine(a, b);
    case BarrierKind::ellipsoid:
      return Polynomial::constant(num_vars(), 1.0) - Polynomial::quadratic_form(phi, center);
    case BarrierKind::polynomial: return poly;
  }
  return {};
}

double BarrierChain::value(int d, const Vec& x) const {
  if (is_affine()) return affine_a[d].dot(x) + affine_b[d];
  return chain[d](x);
}

Vec BarrierChain::gradient(int d, const Vec& x) const {
  if (is_affine()) return affine_a[d];
  return chain[d].gradient_at(x);
}

Mat BarrierChain::hessian(int d, const Vec& x) const {
  if (is_affine()) return Mat::Zero(x.size(), x.size());
  return chain[d].hessian_at(x);
}

double BarrierChain::gamma_offset(int d, double gamma) const {
  require(gamma >= 0.0, "gamma_offset: gamma must be nonnegative");
  if (is_affine()) return gamma * affine_a[d].norm();
  return gamma * grad_bound[d] + 0.5 * gamma * gamma * hess_bound[d];
}

double BarrierChain::shrunk(int d, const Vec& x, double gamma) const {
  return value(d, x) - gamma_offset(d, gamma);
}

namespace {

Polynomial next_member(const Polynomial& hd, const SystemModel& model) {
  const int n = model.n;
  Polynomial out = hd;
  const std::vector<Polynomial> grad = hd.gradient();
  for (int i = 0; i < n; ++i) {
    if (grad[i].terms().empty()) continue;
    out += grad[i] * (*model.poly_drift)[i];
  }
  const Mat ss = model.sigma * model.sigma.transpose();
  for (int i = 0; i < n; ++i) {
    if (grad[i].terms().empty()) continue;
    for (int j = 0; j < n; ++j) {
      if (ss(i, j) == 0.0) continue;
      const Polynomial dij = grad[i].derivative(j);
      if (!dij.terms().empty()) out += dij * (0.5 * ss(i, j));
    }
  }
  return out;
}

// True when sum_i dh/dx_i g_ik is not identically zero for some unmasked input k.
bool actuated_poly(const Polynomial& hd, const SystemModel& model, const Mat& mask) {
  const std::vector<Polynomial> grad = hd.gradient();
  for (int k = 0; k < model.p; ++k) {
    if (mask(k, k) == 0.0) continue;
    Polynomial s(model.n);
    for (int i = 0; i < model.n; ++i) {
      if (grad[i].terms().empty()) continue;
      s += grad[i] * (*model.poly_input)[i][k];
    }
    if (!s.is_zero(1e-12)) return true;
  }
  return false;
}

}  // namespace

BarrierChain build_chain(const Barrier& h, const SystemModel& model, const ChainOptions& opts,
                         const Mat& input_mask) {
  require(h.num_vars() == model.n, "build_chain: barrier dimension differs from state dimension");
  require(opts.max_degree >= 0, "build_chain: max_degree must be nonnegative");
  BarrierChain out;
  out.barrier = h;
  out.input_mask = input_mask.size() == 0 ? Mat::Identity(model.p, model.p) : input_mask;
  require(out.input_mask.rows() == model.p && is_effectiveness_matrix(out.input_mask),
          "build_chain: input mask must be a p x p diagonal 0/1 matrix");

  if (h.kind == BarrierKind::half_plane && model.is_linear) {
    // h^d = a^T (F + I)^d x + b; the diffusion term vanishes for affine members.
    const Mat step = model.F + Mat::Identity(model.n, model.n);
    const Mat gl = model.G * out.input_mask;
    Vec a = h.a;
    const double scale = std::max(1.0, h.a.lpNorm<Eigen::Infinity>());
    for (int d = 0; d <= opts.max_degree; ++d) {
      out.affine_a.push_back(a);
      out.affine_b.push_back(h.b);
      out.chain.push_back(Polynomial::affine(a, h.b));
      out.grad_bound.push_back(a.norm());
      out.hess_bound.push_back(0.0);
      if ((a.transpose() * gl).lpNorm<Eigen::Infinity>() > 1e-12 * scale) {
        out.relative_degree = d;
        return out;
      }
      a = step.transpose() * a;
    }
  } else {
    require(model.poly_drift.has_value() && model.poly_input.has_value(),
            "build_chain: non-LTI chains need polynomial drift and input tables");
    Polynomial hd = h.as_polynomial();
    for (int d = 0; d <= opts.max_degree; ++d) {
      out.chain.push_back(hd);
      if (actuated_poly(hd, model, out.input_mask)) {
        out.relative_degree = d;
        break;
      }
      if (d == opts.max_degree) {
        out.relative_degree = -1;
        break;
      }
      hd = next_member(hd, model);
    }
    bool all_affine = true;
    for (const auto& c : out.chain) all_affine = all_affine && c.is_affine();
    if (all_affine) {
      for (const auto& c : out.chain) {
        out.affine_a.push_back(c.linear_coefficients());
        out.affine_b.push_back(c.constant_term());
        out.grad_bound.push_back(out.affine_a.back().norm());
        out.hess_bound.push_back(0.0);
      }
    } else {
      // Sampled gradient/Hessian bounds over the operating box.
      Vec lo = opts.box_lo.size() == model.n ? opts.box_lo : Vec::Constant(model.n, -1.0);
      Vec hi = opts.box_hi.size() == model.n ? opts.box_hi : Vec::Constant(model.n, 1.0);
      std::mt19937_64 rng(opts.offset_seed);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      out.grad_bound.assign(out.chain.size(), 0.0);
      out.hess_bound.assign(out.chain.size(), 0.0);
      for (int s = 0; s < opts.offset_samples; ++s) {
        Vec x(model.n);
        for (int i = 0; i < model.n; ++i) x(i) = lo(i) + (hi(i) - lo(i)) * uni(rng);
        for (std::size_t d = 0; d < out.chain.size(); ++d) {
          out.grad_bound[d] = std::max(out.grad_bound[d], out.chain[d].gradient_at(x).norm());
          Eigen::SelfAdjointEigenSolver<Mat> es(out.chain[d].hessian_at(x), Eigen::EigenvaluesOnly);
          out.hess_bound[d] = std::max(out.hess_bound[d], es.eigenvalues().cwiseAbs().maxCoeff());
        }
      }
    }
    if (out.relative_degree >= 0) return out;
  }

  if (!opts.allow_degenerate) {
    std::ostringstream os;
    os << "barrier" << (h.name.empty() ? "" : " '" + h.name + "'")
       << " has no actuated chain member up to degree " << opts.max_degree;
    throw UncontrollableBarrierError(os.str());
  }
  out.actuated = false;
  out.relative_degree = 0;
  out.chain.resize(1);
  if (out.is_affine()) {
    out.affine_a.resize(1);
    out.affine_b.resize(1);
  }
  out.grad_bound.resize(1);
  out.hess_bound.resize(1);
  return out;
}

std::string ConstraintRow::tag() const {
  std::ostringstream os;
  switch (source) {
    case RowSource::scbf: os << "scbf"; break;
    case RowSource::hoscbf: os << "hoscbf"; break;
    case RowSource::clf: os << "clf"; break;
    case RowSource::af_cbf: os << "af_cbf"; break;
    case RowSource::af_hocbf: os << "af_hocbf"; break;
    case RowSource::input_limit: os << "input_limit"; break;
  }
  os << "(" << index;
  if (source != RowSource::clf && source != RowSource::input_limit && barrier != 0) os << ",h" << barrier;
  os << ")";
  return os.str();
}

ConstraintRow hoscbf_row(const BarrierChain& chain, const EstimatorState& est,
                         const SystemModel& model, double gamma, int index) {
  require(gamma >= 0.0, "hoscbf_row: gamma must be nonnegative");
  const int d = chain.top();
  const Vec& xh = est.xhat;
  const Vec grad = chain.gradient(d, xh);
  ConstraintRow r;
  r.source = d == 0 ? RowSource::scbf : RowSource::hoscbf;
  r.index = index;
  r.row = (grad.transpose() * model.g(xh)).transpose();
  double bound = -chain.shrunk(d, xh, gamma) - grad.dot(model.f(xh));
  if (!est.open_loop() && est.K.size() > 0) {
    if (!chain.is_affine()) {
      const Mat kn = est.K * est.nu_bar;
      bound -= 0.5 * (kn.transpose() * chain.hessian(d, xh) * kn).trace();
    }
    bound += gamma * (grad.transpose() * est.K * est.c_bar).norm();
  }
  r.bound = bound;
  return r;
}

ConstraintRow scbf_row(const BarrierChain& chain, const EstimatorState& est, const SystemModel& model,
                       double gamma, int index) {
  require(chain.top() == 0, "scbf_row: chain must have relative degree 0");
  return hoscbf_row(chain, est, model, gamma, index);
}

std::vector<BarrierChain> build_pattern_chains(const Barrier& h, const SystemModel& model,
                                               const std::vector<Mat>& patterns,
                                               const ChainOptions& opts) {
  std::vector<BarrierChain> out;
  for (std::size_t j = 0; j < patterns.size(); ++j) {
    try {
      ChainOptions o = opts;
      o.allow_degenerate = false;
      out.push_back(build_chain(h, model, o, patterns[j]));
    } catch (const UncontrollableBarrierError&) {
      std::ostringstream os;
      os << "failure pattern " << j << " leaves barrier"
         << (h.name.empty() ? "" : " '" + h.name + "'") << " without an actuated chain member";
      throw RedundancyViolationError(os.str());
    }
  }
  return out;
}

std::vector<ConstraintRow> af_rows(const std::vector<BarrierChain>& chains, const Vec& x,
                                   const std::vector<Mat>& patterns, const SystemModel& model,
                                   double kappa, int barrier) {
  require(chains.size() == patterns.size(), "af_rows: one chain per pattern is required");
  require(kappa > 0.0, "af_rows: kappa must be positive");
  std::vector<ConstraintRow> rows;
  const Mat gx = model.g(x);
  const Vec fx = model.f(x);
  for (std::size_t j = 0; j < patterns.size(); ++j) {
    const BarrierChain& ch = chains[j];
    if (!ch.actuated) {
      std::ostringstream os;
      os << "failure pattern " << j << " has no valid relative degree";
      throw RedundancyViolationError(os.str());
    }
    const int d = ch.top();
    const Vec grad = ch.gradient(d, x);
    ConstraintRow r;
    r.source = d == 0 ? RowSource::af_cbf : RowSource::af_hocbf;
    r.index = static_cast<int>(j);
    r.barrier = barrier;
    r.row = (grad.transpose() * gx * patterns[j]).transpose();
    double bound = -kappa * ch.value(d, x) - grad.dot(fx);
    if (!ch.is_affine()) {
      bound -= 0.5 * (model.sigma.transpose() * ch.hessian(d, x) * model.sigma).trace();
    }
    r.bound = bound;
    rows.push_back(std::move(r));
  }
  return rows;
}

double lower_order_input_violation(const BarrierChain& chain, const SystemModel& model, int samples,
                                   std::uint64_t seed) {
  if (chain.top() == 0 || samples <= 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  int bad = 0;
  for (int s = 0; s < samples; ++s) {
    Vec x(model.n), u(model.p);
    for (int i = 0; i < model.n; ++i) x(i) = normal(rng);
    for (int i = 0; i < model.p; ++i) u(i) = normal(rng);
    const Mat gl = model.g(x) * chain.input_mask;
    for (int d = 0; d < chain.top(); ++d) {
      if (chain.gradient(d, x).dot(gl * u) < -1e-12) {
        ++bad;
        break;
      }
    }
  }
  return static_cast<double>(bad) / samples;
}

}  // namespace ftcbf
