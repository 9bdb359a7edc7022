#include "doctest.h"
#include "oracles.hpp"

#include "ftcbf/optimizer.hpp"

#include <random>

using namespace ftcbf;

namespace {

ConstraintRow row(std::initializer_list<double> r, double b) {
  ConstraintRow c;
  c.row = Vec(static_cast<Eigen::Index>(r.size()));
  int i = 0;
  for (double v : r) c.row(i++) = v;
  c.bound = b;
  return c;
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("projection onto a half-space") {
    QpProblem q{Mat::Identity(3, 3), {row({1, 0, 0}, 1)}, {}};
    const auto r = solve_qp(q);
    REQUIRE(r.feasible());
    CHECK((r.u - (Vec(3) << 1, 0, 0).finished()).norm() < 1e-12);
    CHECK(r.active == IndexSet{0});
  }

  TEST_CASE("separable rows") {
    QpProblem q{Mat::Identity(2, 2), {row({1, 0}, 1), row({0, 1}, 2)}, {}};
    const auto r = solve_qp(q);
    REQUIRE(r.feasible());
    CHECK((r.u - (Vec(2) << 1, 2).finished()).norm() < 1e-12);
  }

  TEST_CASE("contradictory scalar bounds") {
    QpProblem q{Mat::Identity(1, 1), {row({-1}, -1), row({1}, 2)}, {}};
    const auto r = solve_qp(q);
    REQUIRE_FALSE(r.feasible());
    REQUIRE(r.certificate);
    const Vec y = *r.certificate;
    CHECK(y(0) == doctest::Approx(y(1)));
    CHECK(y.minCoeff() > 0.0);
  }

  TEST_CASE("empty row set returns the reference") {
    QpProblem q{Mat::Identity(2, 2), {}, {}};
    CHECK(solve_qp(q).u.norm() == 0.0);
    q.reference = (Vec(2) << 1, -1).finished();
    CHECK(solve_qp(q).u == q.reference);
  }

  TEST_CASE("degenerate rows") {
    QpProblem q{Mat::Identity(2, 2), {row({0, 0}, -1.0), row({1, 0}, 1)}, {}};
    auto r = solve_qp(q);
    REQUIRE(r.feasible());
    CHECK(r.u(0) == doctest::Approx(1.0));
    q.rows[0].bound = 0.5;
    r = solve_qp(q);
    REQUIRE_FALSE(r.feasible());
    CHECK((*r.certificate)(0) == doctest::Approx(2.0));
    CHECK((*r.certificate)(1) == 0.0);
  }

  TEST_CASE("farkas examples") {
    Mat a(2, 1);
    a << 1, -1;
    CHECK_FALSE(farkas_certificate(a, (Vec(2) << 1, 1).finished()));
    const auto y = farkas_certificate(a, (Vec(2) << 1, -2).finished());
    REQUIRE(y);
    CHECK((*y)(0) == doctest::Approx((*y)(1)));
    CHECK((a.transpose() * *y).norm() < 1e-9);
    CHECK((Vec(2) << 1, -2).finished().dot(*y) == doctest::Approx(-1.0));
  }

  TEST_CASE("random systems: exactly one of solution or certificate") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_int_distribution<int> dim(1, 4);
    for (int trial = 0; trial < 300; ++trial) {
      const int m = dim(rng), p = dim(rng);
      std::vector<ConstraintRow> rows;
      for (int i = 0; i < m; ++i) {
        ConstraintRow c;
        c.row = Vec(p);
        for (int j = 0; j < p; ++j) c.row(j) = uni(rng);
        c.bound = uni(rng);
        rows.push_back(c);
      }
      const auto r = solve_qp({Mat::Identity(p, p), rows, {}});
      Mat A;
      Vec Xi;
      to_farkas_form(rows, p, A, Xi);
      const bool fm = oracles::fourier_motzkin_feasible(A, Xi);
      CHECK(r.feasible() == fm);
      if (r.feasible()) {
        CHECK(min_slack(rows, r.u) >= -1e-9);
        CHECK_FALSE(r.certificate);
      } else {
        const Vec& y = *r.certificate;
        CHECK(y.minCoeff() >= 0.0);
        CHECK((A.transpose() * y).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK(Xi.dot(y) < 0.0);
      }
    }
  }

  TEST_CASE("kkt stationarity and scale equivariance") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      const int p = 3;
      Mat b(p, p);
      for (int i = 0; i < 9; ++i) b(i) = uni(rng);
      const Mat r = b * b.transpose() + 0.5 * Mat::Identity(p, p);
      std::vector<ConstraintRow> rows;
      const Vec u0 = Vec::Random(p);
      for (int i = 0; i < 5; ++i) {
        ConstraintRow c;
        c.row = Vec(p);
        for (int j = 0; j < p; ++j) c.row(j) = uni(rng);
        c.bound = c.row.dot(u0) - 0.1 * (uni(rng) + 1.0);
        rows.push_back(c);
      }
      const Vec ref = Vec::Constant(p, 2.0);
      const auto s1 = solve_qp({r, rows, ref});
      const auto s2 = solve_qp({7.0 * r, rows, ref});
      REQUIRE(s1.feasible());
      CHECK((s1.u - s2.u).norm() < 1e-9);
      Vec stat = 2.0 * r * (s1.u - ref);
      for (std::size_t k = 0; k < s1.active.size(); ++k) {
        stat -= s1.multipliers(static_cast<Eigen::Index>(k)) * rows[s1.active[k]].row;
        CHECK(s1.multipliers(static_cast<Eigen::Index>(k)) >= -1e-12);
      }
      CHECK(stat.norm() <= 1e-7);
    }
  }

  TEST_CASE("lp solver basics") {
    // min -x0 - x1, x0 + x1 + s = 1
    Mat a(1, 3);
    a << 1, 1, 1;
    const auto r = solve_lp(a, Vec::Ones(1), (Vec(3) << -1, -1, 0).finished());
    CHECK(r.feasible);
    CHECK(r.objective == doctest::Approx(-1.0));
    const auto u = solve_lp(a, Vec::Ones(1), (Vec(3) << -1, 0, 0).finished());
    CHECK(u.objective == doctest::Approx(-1.0));
    Mat b(1, 2);
    b << 1, 1;
    CHECK_FALSE(solve_lp(b, -Vec::Ones(1), Vec::Zero(2)).feasible);
  }

  TEST_CASE("non-positive-definite cost is rejected") {
    CHECK_THROWS_AS(solve_qp({Mat::Zero(2, 2), {}, {}}), ContractViolation);
  }

  TEST_CASE("thin wedge far from the reference") {
    const std::vector<ConstraintRow> rows = {row({-0.77912140376342398, 0.64885690255524486}, 0.33428999820197425),
                                             row({0.97945974938865699, -0.82839230512756878}, 0.33428999820197425)};
    const auto res = solve_qp({Mat::Identity(2, 2), rows, {}});
    REQUIRE(res.feasible());
    CHECK(min_slack(rows, res.u) >= -1e-9);
    CHECK(res.active.size() == 2);
  }

  TEST_CASE("phase one survives rows with enormous slack at the reference") {
    const std::vector<ConstraintRow> rows = {
        row({0.0, 1.0}, -0.49043433110061196), row({0.0, 1.0}, 0.035105651568132785),
        row({1914559079.8902352, -0.13962774882074094}, -1.0246286469355826e+20),
        row({1914559079.8913369, -0.037477024501596588}, -1.0246286427435388e+20)};
    const auto res = solve_qp({Mat::Identity(2, 2), rows, {}});
    REQUIRE(res.feasible());
    CHECK(res.u(0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(res.u(1) == doctest::Approx(0.035105651568132785).epsilon(1e-9));
  }
}
