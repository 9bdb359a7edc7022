#include "doctest.h"
#include "fixtures.hpp"

#include "ftcbf/policy.hpp"

#include <random>

using namespace ftcbf;

namespace {

EstimatorState at(const Vec& x) {
  EstimatorState e;
  e.xhat = x;
  return e;
}

// Two singles and their pair estimate; thetas all equal to theta.
EstimatorBank toy_bank(const Vec& xi, const Vec& xj, const Vec& xij, double theta) {
  EstimatorBank b;
  b.singles = {at(xi), at(xj)};
  b.pairs = {at(xij)};
  b.gammas = Vec::Zero(2);
  b.thetas = Mat::Constant(2, 2, theta);
  return b;
}

ConstraintRow row1(double a, double bound, int index) {
  ConstraintRow r;
  r.row = Vec::Constant(1, a);
  r.bound = bound;
  r.index = index;
  r.source = RowSource::hoscbf;
  return r;
}

PolicyConfig cfg1() {
  PolicyConfig c;
  c.R = Mat::Identity(1, 1);
  return c;
}

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("step-2 rule fixture") {
    const auto d = pairwise_rule(1.5, 0.2, 1.4, 1.0);
    CHECK_FALSE(d.remove_i);
    CHECK(d.remove_j);
  }

  TEST_CASE("step-2 rule needs the pair distance above theta") {
    const auto d = pairwise_rule(1.0, 0.9, 0.9, 1.0);
    CHECK_FALSE(d.remove_i);
    CHECK_FALSE(d.remove_j);
  }

  TEST_CASE("step-2 over a bank") {
    // triangle with sides |xi-xj| = 1.5, |xi-xij| = 0.2, |xj-xij| = 1.4
    const double px = (0.04 + 2.25 - 1.96) / 3.0;
    const Vec xij = (Vec(2) << px, std::sqrt(0.04 - px * px)).finished();
    const auto bank = toy_bank(Vec::Zero(2), (Vec(2) << 1.5, 0.0).finished(), xij, 1.0);
    CHECK(step2_removals(bank) == IndexSet{1});
  }

  TEST_CASE("step-2 never removes a consistent estimator") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 500; ++t) {
      EstimatorBank b;
      const int m = 3;
      for (int i = 0; i < m; ++i) b.singles.push_back(at((Vec(2) << u(rng), u(rng)).finished()));
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) b.pairs.push_back(at((Vec(2) << u(rng), u(rng)).finished()));
      b.thetas = Mat::Constant(m, m, 1.0 + u(rng) * 0.5);
      b.gammas = Vec::Zero(m);
      const auto removed = step2_removals(b);
      for (int i = 0; i < m; ++i) {
        bool consistent = true;
        for (int j = 0; j < m; ++j)
          if (j != i && (b.singles[i].xhat - b.singles[j].xhat).norm() > b.thetas(i, j)) consistent = false;
        if (consistent) CHECK(std::find(removed.begin(), removed.end(), i) == removed.end());
      }
    }
  }

  TEST_CASE("active sets") {
    auto model = fixtures::wmr_model();
    const auto chain = build_chain(Barrier::half_plane(Vec::Unit(4, 1), 0.1), model);
    auto bank = make_bank(model, {{0}, {2}}, Vec::Zero(4), {}, false);
    bank.gammas = Vec::Zero(2);
    bank.singles[0].xhat = (Vec(4) << 0, 1.0, 0, 0).finished();
    bank.singles[1].xhat = (Vec(4) << 0, -0.09, 0, 0).finished();
    PolicyConfig c;
    c.delta = 0.05;
    CHECK(active_sets(bank, {chain}, nullptr, c).Z == IndexSet{1});
    c.delta = 1e-6;
    bank.singles[1].xhat(1) = 1.0;
    CHECK(active_sets(bank, {chain}, nullptr, c).Z.empty());
    c.delta = std::numeric_limits<double>::infinity();
    CHECK(active_sets(bank, {chain}, nullptr, c).Z == IndexSet{0, 1});

    const auto clf = make_clf(Mat::Identity(4, 4), Vec::Zero(4), 0.05, {});
    auto with_level = clf;
    with_level.v_bar = 0.5;
    bank.singles[0].xhat.setZero();
    CHECK(active_sets(bank, {chain}, &with_level, c).U == IndexSet{1});
  }

  TEST_CASE("row bookkeeping") {
    auto model = fixtures::wmr_model();
    const auto chain = build_chain(Barrier::half_plane(Vec::Unit(4, 1), 0.1), model);
    auto bank = make_bank(model, {{0}, {2}}, Vec::Constant(4, 0.3), {}, false);
    bank.gammas = Vec::Constant(2, 0.01);
    const auto clf = make_clf(Mat::Identity(4, 4), Vec::Zero(4), 0.05, {});
    PolicyConfig c;
    c.mode = PolicyMode::sensor_ft_clf;
    const auto rows = assemble_sensor_rows(model, bank, {chain}, &clf, {0}, {0, 1}, c);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].tag() == "hoscbf(0)");
    CHECK(rows[1].tag() == "clf(0)");
    CHECK(rows[2].tag() == "clf(1)");
    CHECK(assemble_sensor_rows(model, bank, {chain}, nullptr, {}, {}, c).empty());

    c.R = Mat::Identity(2, 2);
    const auto out = solve_fixed({}, c, Vec::Zero(2));
    CHECK(out.u.norm() == 0.0);
    CHECK_FALSE(out.infeasible);
  }

  TEST_CASE("step 1 succeeds without removals") {
    const auto bank = toy_bank(Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), 1.0);
    auto builder = [](const IndexSet& Z, const IndexSet&) {
      std::vector<ConstraintRow> rows;
      for (int i : Z) rows.push_back(row1(1.0, 0.5 + i, i));
      return rows;
    };
    const auto out = resolve_conflicts(bank, {0, 1}, {}, cfg1(), builder, Vec::Zero(1));
    CHECK(out.step == 1);
    CHECK(out.removed.empty());
    CHECK(out.u(0) == doctest::Approx(1.5));
  }

  TEST_CASE("step 2 prunes the outlier") {
    const auto bank = toy_bank(Vec::Zero(2), (Vec(2) << 3.0, 0.0).finished(), Vec::Zero(2), 1.0);
    auto builder = [](const IndexSet& Z, const IndexSet&) {
      std::vector<ConstraintRow> rows;
      for (int i : Z) rows.push_back(i == 0 ? row1(1.0, 1.0, 0) : row1(-1.0, 1.0, 1));
      return rows;
    };
    const auto out = resolve_conflicts(bank, {0, 1}, {1}, cfg1(), builder, Vec::Zero(1));
    CHECK(out.step == 2);
    REQUIRE(out.removed.size() == 1);
    CHECK(out.removed[0].index == 1);
    CHECK(out.removed[0].reason == RemovalReason::pairwise);
    CHECK(out.Z == IndexSet{0});
    CHECK(out.U.empty());
  }

  TEST_CASE("excessive effort triggers the pairwise test") {
    // Both rows hold together, but only with u = 50.
    auto builder = [](const IndexSet& Z, const IndexSet&) {
      std::vector<ConstraintRow> rows;
      for (int i : Z) rows.push_back(i == 0 ? row1(1.0, 1.0, 0) : row1(1.0, 50.0, 1));
      return rows;
    };
    auto c = cfg1();
    c.admissible_input = 20.0;
    const auto outlier = toy_bank(Vec::Zero(2), (Vec(2) << 3.0, 0.0).finished(), Vec::Zero(2), 1.0);
    auto out = resolve_conflicts(outlier, {0, 1}, {}, c, builder, Vec::Zero(1));
    CHECK(out.step == 2);
    CHECK(out.effort_exceeded);
    CHECK(out.u(0) == doctest::Approx(1.0));
    REQUIRE(out.removed.size() == 1);
    CHECK(out.removed[0].index == 1);

    // Nothing to prune: the Step-1 solution is kept and flagged.
    const auto agree = toy_bank(Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), 1.0);
    out = resolve_conflicts(agree, {0, 1}, {}, c, builder, Vec::Zero(1));
    CHECK(out.step == 1);
    CHECK(out.effort_exceeded);
    CHECK(out.removed.empty());
    CHECK(out.u(0) == doctest::Approx(50.0));

    c.admissible_input = std::numeric_limits<double>::infinity();
    out = resolve_conflicts(outlier, {0, 1}, {}, c, builder, Vec::Zero(1));
    CHECK(out.step == 1);
    CHECK_FALSE(out.effort_exceeded);
  }

  TEST_CASE("step 3 order by residue with ties to the lower index") {
    auto bank = toy_bank(Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), 1.0);
    auto builder = [](const IndexSet& Z, const IndexSet&) {
      std::vector<ConstraintRow> rows;
      for (int i : Z) rows.push_back(i == 0 ? row1(1.0, 1.0, 0) : row1(-1.0, 1.0, 1));
      return rows;
    };
    bank.singles[0].residue = 0.7;
    bank.singles[1].residue = 0.2;
    auto out = resolve_conflicts(bank, {0, 1}, {}, cfg1(), builder, Vec::Zero(1));
    CHECK(out.step == 3);
    REQUIRE(out.removed.size() == 1);
    CHECK(out.removed[0].index == 0);
    CHECK(out.removed[0].reason == RemovalReason::residue);
    CHECK(out.u(0) == doctest::Approx(-1.0));

    bank.singles[1].residue = 0.7;
    out = resolve_conflicts(bank, {0, 1}, {}, cfg1(), builder, Vec::Zero(1));
    REQUIRE(out.removed.size() == 1);
    CHECK(out.removed[0].index == 0);
  }

  TEST_CASE("total infeasibility gives zero input") {
    const auto bank = toy_bank(Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), 1.0);
    auto c = cfg1();
    c.fixed_rows = {row1(1.0, 1.0, 0), row1(-1.0, 1.0, 1)};
    c.fixed_rows[0].source = c.fixed_rows[1].source = RowSource::input_limit;
    auto builder = [](const IndexSet&, const IndexSet&) { return std::vector<ConstraintRow>{}; };
    const auto out = resolve_conflicts(bank, {0, 1}, {}, c, builder, Vec::Constant(1, 3.0));
    CHECK(out.infeasible);
    CHECK(out.u(0) == 0.0);
    CHECK(out.removed.size() == 2);
  }

  TEST_CASE("surviving set is feasible or flagged") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 200; ++t) {
      auto bank = toy_bank((Vec(2) << u(rng), u(rng)).finished(), (Vec(2) << u(rng), u(rng)).finished(),
                           (Vec(2) << u(rng), u(rng)).finished(), 0.5);
      bank.singles[0].residue = u(rng);
      bank.singles[1].residue = u(rng);
      std::vector<ConstraintRow> all;
      for (int i = 0; i < 2; ++i) {
        ConstraintRow r;
        r.row = (Vec(2) << u(rng), u(rng)).finished();
        r.bound = u(rng);
        r.index = i;
        all.push_back(r);
        r.row = (Vec(2) << u(rng), u(rng)).finished();
        all.push_back(r);
      }
      auto builder = [&](const IndexSet& Z, const IndexSet&) {
        std::vector<ConstraintRow> rows;
        for (const auto& r : all)
          if (std::find(Z.begin(), Z.end(), r.index) != Z.end()) rows.push_back(r);
        return rows;
      };
      PolicyConfig c;
      c.R = Mat::Identity(2, 2);
      const auto out = resolve_conflicts(bank, {0, 1}, {}, c, builder, Vec::Zero(2));
      if (!out.infeasible) CHECK(min_slack(out.rows, out.u) >= -1e-9);
    }
  }

  TEST_CASE("compatibility") {
    auto model = fixtures::wmr_model();
    const Vec a = Vec::Unit(4, 1);
    ClfOptions o;
    o.G = fixtures::wmr_G();
    o.x_goal = Vec::Zero(4);
    const auto clf = build_quadratic_clf(fixtures::wmr_F(), 0.05, o);
    const Vec x0 = (Vec(4) << -1.0, 0.5, 0.0, 0.0).finished();

    auto rep = check_clf_cbf_compatibility(a, 0.1, clf.Psi, Vec::Zero(4), 1e-4, model, x0);
    CHECK(rep.goal_on_safe_side);
    CHECK(rep.goal_ellipsoid_disjoint);
    CHECK(rep.compatible);
    CHECK_FALSE(rep.full_rank_input);

    rep = check_clf_cbf_compatibility(a, 0.1, clf.Psi, (Vec(4) << 0, -0.5, 0, 0).finished(), 1e-4, model);
    CHECK_FALSE(rep.goal_on_safe_side);
    CHECK_FALSE(rep.compatible);
    REQUIRE_FALSE(rep.reasons.empty());

    // the ellipsoid reach matches a direct minimisation of a^T x on its boundary
    const double theta = 0.05;
    rep = check_clf_cbf_compatibility(a, 0.1, clf.Psi, Vec::Zero(4), theta, model);
    const double level = default_clf_level(clf.Psi, theta);
    Eigen::SelfAdjointEigenSolver<Mat> es(clf.Psi);
    const Mat half_inv = es.operatorInverseSqrt();
    double lowest = 0.0;
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 20000; ++t) {
      Vec w(4);
      for (int i = 0; i < 4; ++i) w(i) = nd(rng);
      const Vec x = std::sqrt(level) * half_inv * w.normalized();
      lowest = std::min(lowest, a.dot(x));
    }
    const double reach = std::sqrt(level * a.dot(clf.Psi.ldlt().solve(a)));
    CHECK(-lowest <= reach + 1e-12);
    CHECK(-lowest >= 0.95 * reach);
    CHECK(rep.goal_ellipsoid_disjoint == (0.1 - reach > 0.0));
  }
}
