#include "doctest.h"
#include "fixtures.hpp"

#include "ftcbf/runner.hpp"
#include "ftcbf/scenarios.hpp"

#include <cmath>

using namespace ftcbf;

TEST_SUITE("scenarios") {
  TEST_CASE("matrices match the printed values") {
    CHECK(wmr_F() == fixtures::wmr_F());
    CHECK(wmr_G() == fixtures::wmr_G());
    CHECK(wmr_c() == fixtures::wmr_c());
    CHECK(boeing_F() == fixtures::boeing_F());
    CHECK(boeing_G() == fixtures::boeing_G());
    const Vec aG = (Vec::Unit(4, 1).transpose() * boeing_G()).transpose();
    CHECK(aG == (Vec(3) << -0.475, -0.5, -0.3).finished());
  }

  TEST_CASE("wmr default build") {
    const Scenario s = build_wmr_scenario();
    CHECK(s.model.n == 4);
    CHECK(s.model.p == 2);
    CHECK(s.model.q == 6);
    CHECK(s.faults.sensor_patterns.size() == 2);
    REQUIRE(s.barriers.size() == 1);
    CHECK(s.barriers[0].a == Vec::Unit(4, 1));
    CHECK(s.barriers[0].b == 0.1);
    REQUIRE(s.goal);
    CHECK(s.goal->x_goal == Vec::Zero(4));
    CHECK(s.goal->radius == 0.05);
    CHECK(s.policy.mode == PolicyMode::sensor_ft_clf);
    CHECK(s.seeds.size() == 20);
    CHECK(s.sim.x0(1) > -0.1);
    const auto chain = build_chain(s.barriers[0], s.model, s.chain);
    CHECK(chain.relative_degree == 1);
  }

  TEST_CASE("wmr patterns are disjoint and keep every position coordinate observed") {
    const Scenario s = build_wmr_scenario();
    const auto& pats = s.faults.sensor_patterns;
    for (std::size_t i = 0; i < pats.size(); ++i) {
      for (std::size_t j = i + 1; j < pats.size(); ++j) {
        for (int a : pats[i]) CHECK(std::find(pats[j].begin(), pats[j].end(), a) == pats[j].end());
      }
      const Mat c = remove_rows(s.model.c, pats[i]);
      for (int coord = 0; coord < 2; ++coord) CHECK(c.col(coord).cwiseAbs().maxCoeff() > 0.0);
    }
  }

  TEST_CASE("boeing default build") {
    const Scenario s = build_boeing_scenario();
    CHECK(s.model.n == 4);
    CHECK(s.model.p == 3);
    CHECK(s.model.sigma.isZero());
    CHECK(s.policy.mode == PolicyMode::actuator_ft);
    REQUIRE(s.faults.failure_schedule.size() == 2);
    const Mat l1 = Vec((Vec(3) << 1, 0, 1).finished()).asDiagonal();
    const Mat l2 = Vec((Vec(3) << 0, 1, 1).finished()).asDiagonal();
    CHECK(s.faults.failure_schedule[0].t_start == doctest::Approx(1.0));
    CHECK(s.faults.failure_schedule[0].effectiveness == l1);
    CHECK(s.faults.failure_schedule[1].t_start == doctest::Approx(10.0));
    CHECK(s.faults.failure_schedule[1].effectiveness == l2);
    REQUIRE(s.actuator_patterns.size() == 3);
    CHECK(s.actuator_patterns[0] == Mat::Identity(3, 3));
    REQUIRE(s.barriers.size() == 2);
    CHECK(s.barriers[0].a == Vec::Unit(4, 1));
    CHECK(s.barriers[1].a == -Vec::Unit(4, 1));
    CHECK(s.barriers[0].b == 0.025);
    for (const auto& b : s.barriers) CHECK(build_chain(b, s.model).relative_degree == 0);
  }

  TEST_CASE("boeing stays controllable under each failure") {
    const Scenario s = build_boeing_scenario();
    for (const Mat& l : s.actuator_patterns) CHECK(controllability_rank(s.model.F, s.model.G * l) == 4);
  }

  TEST_CASE("compensator examples") {
    auto o = wmr_compensator((Vec(2) << 1.0, 0.0).finished(), 0.0, 0.0, 1.0);
    CHECK(o.omega1 == doctest::Approx(1.0));
    CHECK(o.omega2 == doctest::Approx(0.0));
    o = wmr_compensator((Vec(2) << 1.0, 0.0).finished(), M_PI / 2.0, 1.0, 0.0);
    CHECK(o.omega1 == doctest::Approx(1.0));
    CHECK(o.omega2 == doctest::Approx(-1.0));
    o = wmr_compensator(Vec::Zero(2), 0.3, 0.7, 0.01);
    CHECK(o.omega1 == 0.7);
    CHECK(o.omega2 == 0.0);
    CHECK_FALSE(o.clamped);
  }

  TEST_CASE("compensator clamps to the signed floor") {
    auto o = wmr_compensator((Vec(2) << 0.0, 1.0).finished(), 0.0, 0.0, 0.01);
    CHECK(o.clamped);
    CHECK(o.omega1 == kOmegaFloor);
    CHECK(o.omega2 == doctest::Approx(1.0 / kOmegaFloor));
    o = wmr_compensator((Vec(2) << 0.0, 1.0).finished(), 0.0, -1e-5, 0.01);
    CHECK(o.omega1 == -kOmegaFloor);
  }

  TEST_CASE("contradictory configuration is rejected") {
    WmrConfig c;
    c.attack_channel = 7;
    CHECK_THROWS_AS(build_wmr_scenario(c), ScenarioValidationError);
    WmrConfig d;
    d.patterns = {{0, 2}, {2}};
    CHECK_THROWS_AS(build_wmr_scenario(d), ScenarioValidationError);
  }

  TEST_CASE("wmr without attack reaches the goal safely") {
    WmrConfig c;
    c.active_fault.reset();
    Scenario s = build_wmr_scenario(c);
    const auto ps = prepare(s);
    const auto r = run_closed_loop(ps, 3, false);
    CHECK(r.summary.min_h >= 0.0);
    CHECK(r.summary.reach_time.has_value());
  }

  TEST_CASE("boeing run with failures stays inside the yaw band") {
    const auto ps = prepare(build_boeing_scenario());
    const auto r = run_closed_loop(ps, 1, false);
    CHECK(r.summary.min_h >= 0.0);
    CHECK(r.states.back().norm() <= 0.01);
  }
}
