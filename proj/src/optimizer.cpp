#include "ftcbf/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ftcbf {

namespace {

constexpr double kPivotTol = 1e-10;
constexpr double kCostTol = 1e-11;

// Tableau simplex with Bland's rule. Rows 0..m-1 hold [B^-1 A | B^-1 b], row m
// holds the reduced costs and -objective. Returns false when unbounded.
bool run_simplex(Mat& t, std::vector<int>& basis, int allowed_cols, int max_iter) {
  const Eigen::Index m = t.rows() - 1;
  const Eigen::Index rhs = t.cols() - 1;
  for (int it = 0; it < max_iter; ++it) {
    int s = -1;
    for (int j = 0; j < allowed_cols; ++j) {
      if (t(m, j) < -kCostTol) {
        s = j;
        break;
      }
    }
    if (s < 0) return true;
    int r = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (t(i, s) <= kPivotTol) continue;
      const double ratio = t(i, rhs) / t(i, s);
      if (r < 0 || ratio < best - 1e-12 ||
          (std::abs(ratio - best) <= 1e-12 && basis[i] < basis[r])) {
        best = ratio;
        r = static_cast<int>(i);
      }
    }
    if (r < 0) return false;
    t.row(r) /= t(r, s);
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i != r && t(i, s) != 0.0) t.row(i) -= t(i, s) * t.row(r);
    }
    basis[r] = s;
  }
  throw SolverError("simplex iteration limit reached");
}

}  // namespace

LpResult solve_lp(const Mat& A, const Vec& b, const Vec& c) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  require(b.size() == m && c.size() == n, "solve_lp: dimension mismatch");
  require(A.allFinite() && b.allFinite() && c.allFinite(), "solve_lp: non-finite data");
  LpResult res;
  if (m == 0) {
    res.feasible = true;
    res.x = Vec::Zero(n);
    res.unbounded = (c.array() < 0.0).any();
    return res;
  }
  // Columns: n originals, m artificials, rhs.
  Mat t = Mat::Zero(m + 1, n + m + 1);
  std::vector<int> basis(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sgn = b(i) < 0.0 ? -1.0 : 1.0;
    t.block(i, 0, 1, n) = sgn * A.row(i);
    t(i, n + i) = 1.0;
    t(i, n + m) = sgn * b(i);
    basis[i] = static_cast<int>(n + i);
  }
  for (Eigen::Index i = 0; i < m; ++i) t.row(m) -= t.row(i);
  for (Eigen::Index i = 0; i < m; ++i) t(m, n + i) = 0.0;
  const int iter_cap = 5000 + 50 * static_cast<int>(n + m);
  run_simplex(t, basis, static_cast<int>(n + m), iter_cap);
  const double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  if (-t(m, n + m) > 1e-9 * scale) return res;

  // Drive remaining artificials out of the basis; drop redundant rows.
  std::vector<Eigen::Index> keep_rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[i] >= n) {
      int s = -1;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (std::abs(t(i, j)) > 1e-9) {
          s = static_cast<int>(j);
          break;
        }
      }
      if (s >= 0) {
        t.row(i) /= t(i, s);
        for (Eigen::Index k = 0; k <= m; ++k) {
          if (k != i && t(k, s) != 0.0) t.row(k) -= t(k, s) * t.row(i);
        }
        basis[i] = s;
      } else {
        continue;
      }
    }
    keep_rows.push_back(i);
  }
  const auto mk = static_cast<Eigen::Index>(keep_rows.size());
  Mat t2 = Mat::Zero(mk + 1, n + 1);
  std::vector<int> basis2(mk);
  for (Eigen::Index k = 0; k < mk; ++k) {
    t2.block(k, 0, 1, n) = t.block(keep_rows[k], 0, 1, n);
    t2(k, n) = t(keep_rows[k], n + m);
    basis2[k] = basis[keep_rows[k]];
  }
  t2.block(mk, 0, 1, n) = c.transpose();
  for (Eigen::Index k = 0; k < mk; ++k) {
    const double cb = c(basis2[k]);
    if (cb != 0.0) t2.row(mk) -= cb * t2.row(k);
  }
  res.feasible = true;
  if (!run_simplex(t2, basis2, static_cast<int>(n), iter_cap)) {
    res.unbounded = true;
  }
  res.x = Vec::Zero(n);
  for (Eigen::Index k = 0; k < mk; ++k) res.x(basis2[k]) = std::max(0.0, t2(k, n));
  res.objective = c.dot(res.x);
  return res;
}

std::optional<Vec> farkas_certificate(const Mat& A, const Vec& Xi) {
  const Eigen::Index m = A.rows();
  const Eigen::Index p = A.cols();
  require(Xi.size() == m, "farkas_certificate: dimension mismatch");
  require(A.allFinite() && Xi.allFinite(), "farkas_certificate: non-finite data");
  // Zero rows decide on their own: 0 <= Xi_i.
  std::vector<Eigen::Index> live;
  Vec norms = Vec::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    norms(i) = A.row(i).norm();
    if (norms(i) <= 1e-14) {
      if (Xi(i) < -1e-12) {
        Vec y = Vec::Zero(m);
        y(i) = 1.0 / -Xi(i);
        return y;
      }
    } else {
      live.push_back(i);
    }
  }
  const auto k = static_cast<Eigen::Index>(live.size());
  if (k == 0) return std::nullopt;
  // y_hat >= 0, A_hat^T y_hat = 0, Xi_hat^T y_hat = -1 with unit-norm rows.
  Mat lhs(p + 1, k);
  Vec rhs = Vec::Zero(p + 1);
  rhs(p) = -1.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::Index i = live[c];
    lhs.block(0, c, p, 1) = A.row(i).transpose() / norms(i);
    lhs(p, c) = Xi(i) / norms(i);
  }
  const LpResult lp = solve_lp(lhs, rhs, Vec::Zero(k));
  if (!lp.feasible) return std::nullopt;
  Vec y = Vec::Zero(m);
  for (Eigen::Index c = 0; c < k; ++c) y(live[c]) = lp.x(c) / norms(live[c]);
  return y;
}

void to_farkas_form(const std::vector<ConstraintRow>& rows, int p, Mat& A, Vec& Xi) {
  const auto m = static_cast<Eigen::Index>(rows.size());
  A.resize(m, p);
  Xi.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    require(rows[i].row.size() == p, "to_farkas_form: row has wrong dimension");
    A.row(i) = -rows[i].row.transpose();
    Xi(i) = -rows[i].bound;
  }
}

double min_slack(const std::vector<ConstraintRow>& rows, const Vec& u) {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) s = std::min(s, r.row.dot(u) - r.bound);
  return s;
}

namespace {

QpResult infeasible_result(const std::vector<ConstraintRow>& rows, int p) {
  Mat A;
  Vec Xi;
  to_farkas_form(rows, p, A, Xi);
  QpResult res;
  res.status = QpStatus::infeasible;
  res.u = Vec::Zero(p);
  res.certificate = farkas_certificate(A, Xi);
  if (!res.certificate) {
    throw SolverError("phase-one LP reported infeasibility but no Farkas certificate was found");
  }
  return res;
}

}  // namespace

QpResult solve_qp(const QpProblem& prob) {
  const Eigen::Index p = prob.R.rows();
  require(p > 0 && prob.R.cols() == p, "solve_qp: R must be square");
  require((prob.R - prob.R.transpose()).lpNorm<Eigen::Infinity>() <=
              1e-12 * std::max(1.0, prob.R.lpNorm<Eigen::Infinity>()),
          "solve_qp: R must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(prob.R, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() > 1e-12, "solve_qp: R must be positive definite");
  const Vec ref = prob.reference.size() == 0 ? Vec::Zero(p) : prob.reference;
  require(ref.size() == p, "solve_qp: reference has wrong dimension");

  // Normalised copies of the live rows; zero rows are dropped or decide infeasibility.
  std::vector<Eigen::Index> idx;
  std::vector<Vec> a;
  std::vector<double> bnd;
  for (std::size_t i = 0; i < prob.rows.size(); ++i) {
    const ConstraintRow& r = prob.rows[i];
    require(r.row.size() == p && r.row.allFinite() && std::isfinite(r.bound),
            "solve_qp: constraint row must be finite and of size p");
    const double nrm = r.row.norm();
    if (nrm <= 1e-14) {
      if (r.bound > 0.0) return infeasible_result(prob.rows, static_cast<int>(p));
      continue;
    }
    idx.push_back(static_cast<Eigen::Index>(i));
    a.push_back(r.row / nrm);
    bnd.push_back(r.bound / nrm);
  }
  const auto m = static_cast<Eigen::Index>(idx.size());
  const Mat r2 = 2.0 * prob.R;

  QpResult res;
  Vec u = ref;
  auto violated = [&](const Vec& x) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (a[i].dot(x) < bnd[i] - 1e-12) return true;
    }
    return false;
  };
  if (violated(u)) {
    // Feasible start closest to the reference in the 1-norm:
    // u = ref + v+ - v-, rows (v+ - v-) - s = b - a.ref.
    // Rows with a huge slack at the reference wreck the tableau's scaling, so
    // each bound is first tightened to at most `cap` below a.ref. Any point
    // found this way is feasible for the original rows.
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) worst = std::max(worst, bnd[i] - a[i].dot(ref));
    Mat lp_a = Mat::Zero(m, 2 * p + m);
    Vec lp_b(m);
    Vec lp_c = Vec::Zero(2 * p + m);
    lp_c.head(2 * p).setOnes();
    for (Eigen::Index i = 0; i < m; ++i) {
      lp_a.block(i, 0, 1, p) = a[i].transpose();
      lp_a.block(i, p, 1, p) = -a[i].transpose();
      lp_a(i, 2 * p + i) = -1.0;
    }
    auto phase_one = [&](double cap, double relax) {
      for (Eigen::Index i = 0; i < m; ++i) {
        lp_b(i) = std::max(bnd[i] - a[i].dot(ref), -cap) - relax;
      }
      return solve_lp(lp_a, lp_b, lp_c);
    };
    const double base = 10.0 * std::max(1.0, worst);
    LpResult lp;
    for (double cap = base; cap < 1e13 * base && !lp.feasible; cap *= 1e3) lp = phase_one(cap, 0.0);
    if (!lp.feasible) {
      // The certificate LP decides. Without a certificate the system is
      // feasible up to round-off, so phase one is retried on slightly relaxed rows.
      Mat A;
      Vec Xi;
      to_farkas_form(prob.rows, static_cast<int>(p), A, Xi);
      if (auto y = farkas_certificate(A, Xi)) {
        res.status = QpStatus::infeasible;
        res.u = Vec::Zero(p);
        res.certificate = std::move(y);
        return res;
      }
      for (double relax = 1e-10; !lp.feasible && relax <= 1e-6; relax *= 100.0) {
        lp = phase_one(base, relax * base);
      }
      if (!lp.feasible) throw SolverError("phase-one LP and certificate LP disagree");
    }
    u = ref + lp.x.head(p) - lp.x.segment(p, p);
  }

  // Primal active-set iterations.
  std::vector<Eigen::Index> work;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::abs(a[i].dot(u) - bnd[i]) <= 1e-12) {
      // Keep the working set linearly independent.
      Mat aw(static_cast<Eigen::Index>(work.size()) + 1, p);
      for (std::size_t k = 0; k < work.size(); ++k) aw.row(k) = a[work[k]].transpose();
      aw.row(aw.rows() - 1) = a[i].transpose();
      Eigen::FullPivLU<Mat> lu(aw);
      lu.setThreshold(1e-10);
      if (lu.rank() == aw.rows()) work.push_back(i);
    }
  }
  const int cap = 200 + 50 * static_cast<int>(m + p);
  Vec lambda;
  for (int it = 0;; ++it) {
    if (it >= cap) throw SolverError("active-set iteration limit reached");
    res.iterations = it + 1;
    const auto w = static_cast<Eigen::Index>(work.size());
    Mat aw(w, p);
    for (Eigen::Index k = 0; k < w; ++k) aw.row(k) = a[work[k]].transpose();
    const Vec grad = r2 * (u - ref);
    // Null-space step: exactly zero once the working rows span R^p.
    Vec step = Vec::Zero(p);
    Mat nullb;
    if (w == 0) {
      nullb = Mat::Identity(p, p);
    } else {
      Eigen::JacobiSVD<Mat> svd(aw, Eigen::ComputeFullV);
      nullb = svd.matrixV().rightCols(p - w);
    }
    if (nullb.cols() > 0) {
      const Mat reduced = nullb.transpose() * r2 * nullb;
      step = -nullb * reduced.ldlt().solve(nullb.transpose() * grad);
    }
    // Stationarity: grad + r2 step = aw^T lambda.
    lambda = w == 0 ? Vec() : Vec(aw.transpose().colPivHouseholderQr().solve(grad + r2 * step));
    if (step.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, u.lpNorm<Eigen::Infinity>())) {
      int drop = -1;
      for (Eigen::Index k = 0; k < w; ++k) {
        if (lambda(k) < -1e-12) {
          if (drop < 0 || work[k] < work[drop]) drop = static_cast<int>(k);
        }
      }
      if (drop < 0) break;
      work.erase(work.begin() + drop);
      continue;
    }
    double alpha = 1.0;
    Eigen::Index block = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(work.begin(), work.end(), i) != work.end()) continue;
      const double ap = a[i].dot(step);
      if (ap >= -1e-14) continue;
      const double t = std::max(0.0, (bnd[i] - a[i].dot(u)) / ap);
      if (t < alpha - 1e-15 || (block >= 0 && std::abs(t - alpha) <= 1e-15 && i < block)) {
        alpha = t;
        block = i;
      }
    }
    u += alpha * step;
    if (block >= 0) {
      work.push_back(block);
      std::sort(work.begin(), work.end());
    }
  }

  res.status = QpStatus::optimal;
  res.u = u;
  res.objective = (u - ref).dot(prob.R * (u - ref));
  res.multipliers = Vec(static_cast<Eigen::Index>(work.size()));
  for (std::size_t k = 0; k < work.size(); ++k) {
    res.active.push_back(static_cast<int>(idx[work[k]]));
    // Convert back to the caller's row scale.
    res.multipliers(static_cast<Eigen::Index>(k)) =
        lambda(static_cast<Eigen::Index>(k)) / prob.rows[idx[work[k]]].row.norm();
  }
  return res;
}

}  // namespace ftcbf
