#include "ftcbf/clf.hpp"

#include "ftcbf/linalg.hpp"

#include <cmath>

namespace ftcbf {

double QuadraticClf::value(const Vec& x) const {
  const Vec e = x - x_goal;
  return e.dot(Psi * e);
}

Vec QuadraticClf::gradient(const Vec& x) const { return 2.0 * Psi * (x - x_goal); }

void QuadraticClf::validate() const {
  require(Psi.rows() == Psi.cols() && Psi.rows() == x_goal.size(), "QuadraticClf: dimension mismatch");
  require((Psi - Psi.transpose()).lpNorm<Eigen::Infinity>() <= 1e-9 * std::max(1.0, Psi.lpNorm<Eigen::Infinity>()),
          "QuadraticClf: Psi must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(Psi, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() > 0.0, "QuadraticClf: Psi must be positive definite");
  require(rho > 0.0, "QuadraticClf: rho must be positive");
  require(v_bar >= 0.0, "QuadraticClf: v_bar must be nonnegative");
}

QuadraticClf make_clf(const Mat& Psi, const Vec& x_goal, double d, const ClfOptions& opts) {
  require(d > 0.0, "make_clf: goal radius must be positive");
  QuadraticClf clf;
  clf.Psi = symmetrize(Psi);
  clf.x_goal = x_goal.size() == 0 ? Vec::Zero(Psi.rows()) : x_goal;
  Eigen::SelfAdjointEigenSolver<Mat> es(clf.Psi, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  clf.rho = 1.0 / (d * lmax);
  clf.M = 2.0 * lmax * (opts.box_radius + clf.x_goal.norm());
  clf.k = 1;
  clf.v_bar = opts.v_bar.value_or(0.0);
  clf.decay = opts.decay;
  clf.validate();
  return clf;
}

QuadraticClf build_quadratic_clf(const Mat& F, double d, const ClfOptions& opts) {
  require(d > 0.0, "build_quadratic_clf: goal radius must be positive");
  const Eigen::Index n = F.rows();
  Mat pl;
  bool stabilized = false;
  std::string note;
  try {
    pl = solve_lyapunov(F, Mat::Identity(n, n));
  } catch (const LyapunovError& e) {
    Mat fcl = opts.F_cl;
    if (fcl.size() == 0) {
      if (opts.G.size() == 0) throw;
      const Mat k = lqr_gain(F, opts.G, Mat::Identity(n, n), Mat::Identity(opts.G.cols(), opts.G.cols()));
      fcl = F - opts.G * k;
    }
    pl = solve_lyapunov(fcl, Mat::Identity(n, n));
    stabilized = true;
    note = std::string(e.what()) + "; used the stabilised closed-loop matrix instead";
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(pl, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) {
    throw LyapunovError("Lyapunov solution is not positive definite; the matrix is not Hurwitz");
  }
  const Eigen::Index k = opts.scaled_dims < 0 ? n / 2 : opts.scaled_dims;
  require(k <= n, "build_quadratic_clf: scaled_dims exceeds the state dimension");
  Vec dscale = Vec::Ones(n);
  dscale.head(k).setConstant(1.0 / d);
  const Mat psi = dscale.asDiagonal() * pl * dscale.asDiagonal();
  QuadraticClf clf = make_clf(psi, opts.x_goal, d, opts);
  clf.used_stabilized = stabilized;
  clf.note = note;
  return clf;
}

std::optional<ConstraintRow> clf_row(const QuadraticClf& clf, const EstimatorState& est,
                                     const SystemModel& model, double gamma, int index) {
  const Vec& xh = est.xhat;
  const Vec grad = clf.gradient(xh);
  if (grad.lpNorm<Eigen::Infinity>() == 0.0) return std::nullopt;
  ConstraintRow r;
  r.source = RowSource::clf;
  r.index = index;
  r.row = -(grad.transpose() * model.g(xh)).transpose();
  double bound = grad.dot(model.f(xh)) + kClfMargin;
  if (!est.open_loop() && est.K.size() > 0) {
    bound += gamma * (grad.transpose() * est.K * est.c_bar).norm();
    const Mat kn = est.K * est.nu_bar;
    bound += 0.5 * (kn.transpose() * clf.hessian() * kn).trace();
  }
  if (clf.decay) bound += clf.rho * clf.value(xh);
  r.bound = bound;
  return r;
}

std::optional<double> goal_reach_time(const std::vector<Vec>& trajectory, double dt,
                                      const Vec& x_goal, double d, const IndexSet& dims) {
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const Vec& x = trajectory[k];
    double dist2 = 0.0;
    if (dims.empty()) {
      dist2 = (x - x_goal).squaredNorm();
    } else {
      for (int i : dims) dist2 += (x(i) - x_goal(i)) * (x(i) - x_goal(i));
    }
    if (std::sqrt(dist2) <= d) return static_cast<double>(k) * dt;
  }
  return std::nullopt;
}

}  // namespace ftcbf
