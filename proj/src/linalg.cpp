#include "ftcbf/linalg.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <sstream>

namespace ftcbf {

Mat solve_lyapunov(const Mat& a, const Mat& q) {
  require(a.rows() == a.cols() && q.rows() == a.rows() && q.cols() == a.cols(),
          "solve_lyapunov: A and Q must be square and of equal size");
  const Eigen::Index n = a.rows();
  Eigen::EigenSolver<Mat> es(a, false);
  const Eigen::VectorXcd lam = es.eigenvalues();
  const double scale = std::max(1.0, a.lpNorm<Eigen::Infinity>());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      if (std::abs(lam(i) + lam(j)) <= 1e-10 * scale) {
        std::ostringstream os;
        os << "Lyapunov equation is singular: eigenvalues " << lam(i) << " and " << lam(j)
           << " of A sum to zero";
        throw LyapunovError(os.str());
      }
    }
  }
  const Mat id = Mat::Identity(n, n);
  // vec(A^T X + X A) = (I (x) A^T + A^T (x) I) vec(X)
  const Mat op = Eigen::kroneckerProduct(id, a.transpose()).eval() +
                 Eigen::kroneckerProduct(a.transpose(), id).eval();
  const Vec rhs = -Eigen::Map<const Vec>(q.data(), n * n);
  const Vec sol = op.fullPivLu().solve(rhs);
  Mat x = Eigen::Map<const Mat>(sol.data(), n, n);
  return symmetrize(x);
}

Mat riccati_rhs(const Mat& a, const Mat& q, const Mat& s, const Mat& p) {
  return a * p + p * a.transpose() + q - p * s * p;
}

namespace {

// Flow of the Riccati ODE over time h: with d/dt [X; Y] = [[-A^T, S], [Q, A]] [X; Y],
// X(0) = I, Y(0) = P0, the solution is P(h) = Y(h) X(h)^-1.
bool flow_step(const Mat& a, const Mat& q, const Mat& s, const Mat& p, double h, Mat& out) {
  const Eigen::Index n = a.rows();
  Mat m(2 * n, 2 * n);
  m << -a.transpose(), s, q, a;
  const Mat phi = (m * h).exp();
  if (!phi.allFinite()) return false;
  const Mat x = phi.topLeftCorner(n, n) + phi.topRightCorner(n, n) * p;
  const Mat y = phi.bottomLeftCorner(n, n) + phi.bottomRightCorner(n, n) * p;
  Eigen::PartialPivLU<Mat> lu(x.transpose());
  const double rc = lu.rcond();
  if (!(rc > 1e-12)) return false;
  out = symmetrize(lu.solve(y.transpose()).transpose());
  return out.allFinite();
}

}  // namespace

Mat riccati_fixed_point(const Mat& a, const Mat& q, const Mat& s, const Mat& p0,
                        const RiccatiOptions& opts) {
  const Eigen::Index n = a.rows();
  require(a.cols() == n && q.rows() == n && q.cols() == n && s.rows() == n && s.cols() == n &&
              p0.rows() == n && p0.cols() == n,
          "riccati_fixed_point: dimension mismatch");
  Mat m(2 * n, 2 * n);
  m << -a.transpose(), s, q, a;
  const double mnorm = std::max(m.lpNorm<Eigen::Infinity>(), 1e-12);
  double h = 0.5 / mnorm;
  const double h_max = 1e6;
  Mat p = symmetrize(p0);
  bool converged = false;
  for (int step = 0; step < opts.max_steps; ++step) {
    if (riccati_rhs(a, q, s, p).lpNorm<Eigen::Infinity>() < opts.tolerance) {
      converged = true;
      break;
    }
    Mat next;
    if (!flow_step(a, q, s, p, h, next)) {
      h *= 0.5;
      if (h < 1e-14) break;
      continue;
    }
    p = next;
    h = std::min(2.0 * h, h_max);
  }
  if (!converged) {
    throw DetectabilityError(
        "Riccati iteration did not settle; the pair (F, c) is probably not detectable");
  }
  if (opts.newton_polish) {
    // Newton steps on the algebraic equation; accepted only while the residual drops.
    double res = riccati_rhs(a, q, s, p).lpNorm<Eigen::Infinity>();
    for (int it = 0; it < 8 && res > 0.0; ++it) {
      const Mat acl = a - p * s;
      Mat dp;
      try {
        dp = solve_lyapunov(acl.transpose(), riccati_rhs(a, q, s, p));
      } catch (const LyapunovError&) {
        break;
      }
      const Mat cand = symmetrize(p + dp);
      const double cres = riccati_rhs(a, q, s, cand).lpNorm<Eigen::Infinity>();
      if (!(cres < res)) break;
      p = cand;
      res = cres;
    }
  }
  return p;
}

Mat lqr_gain(const Mat& f, const Mat& g, const Mat& q, const Mat& r) {
  require(f.rows() == f.cols() && g.rows() == f.rows() && r.rows() == g.cols(),
          "lqr_gain: dimension mismatch");
  const Mat rinv = r.inverse();
  const Mat x = riccati_fixed_point(f.transpose(), q, g * rinv * g.transpose(),
                                    Mat::Zero(f.rows(), f.cols()));
  return rinv * g.transpose() * x;
}

}  // namespace ftcbf
