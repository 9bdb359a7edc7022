#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "ftcbf/estimator_bank.hpp"
#include "ftcbf/linalg.hpp"

using namespace ftcbf;

TEST_SUITE("estimator_bank") {
  TEST_CASE("reduce_output") {
    CHECK(reduce_output((Vec(3) << 1, 2, 3).finished(), {1}) == (Vec(2) << 1, 3).finished());
    CHECK(reduce_output((Vec(6) << 1, 2, 3, 4, 5, 6).finished(), {0}) ==
          (Vec(5) << 2, 3, 4, 5, 6).finished());
    CHECK(reduce_output((Vec(3) << 1, 2, 3).finished(), {}) == (Vec(3) << 1, 2, 3).finished());
  }

  TEST_CASE("reduce then measure equals measuring through the reduced map") {
    auto m = fixtures::wmr_model(0.0, 0.0);
    FaultScenario scen;
    const Vec x = (Vec(4) << 0.3, -0.2, 1.5, 0.7).finished();
    const Vec y = measure(m, x, 0.0, scen, Vec::Zero(6), 0.01);
    const Mat cbar = remove_rows(m.c, {2});
    CHECK(reduce_output(y, {2}) == cbar * x * 0.01);
  }

  TEST_CASE("scalar steady-state gains") {
    const Mat one = Mat::Identity(1, 1);
    CHECK(steady_state_gain(Mat::Zero(1, 1), one, one, one)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(steady_state_gain(-one, one, Mat::Zero(1, 1), one)(0, 0)) < 1e-12);
  }

  TEST_CASE("wmr steady-state gain matches the Hamiltonian ARE and long ODE integration") {
    auto m = fixtures::wmr_model();
    const Mat cbar = remove_rows(m.c, {0});
    const Mat rbar = 1e-4 * Mat::Identity(5, 5);
    const Mat q = 1e-4 * Mat::Identity(4, 4);
    const Mat k = steady_state_gain(m.F, cbar, q, rbar);
    const Mat s = cbar.transpose() * rbar.inverse() * cbar;
    const Mat p_are = oracles::are_hamiltonian(m.F, q, s);
    const Mat k_are = p_are * cbar.transpose() * rbar.inverse();
    CHECK((k - k_are).lpNorm<Eigen::Infinity>() < 1e-7);
    const Mat p_ode = oracles::riccati_rk4(m.F, q, s, Mat::Zero(4, 4), 1e-3, 60000);
    const Mat k_ode = p_ode * cbar.transpose() * rbar.inverse();
    CHECK((k - k_ode).lpNorm<Eigen::Infinity>() <= 1e-8);
  }

  TEST_CASE("undetectable pair raises a detectability error") {
    const Mat a = Mat::Identity(1, 1);
    CHECK_THROWS_AS(steady_state_gain(a, Mat::Zero(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1)),
                    DetectabilityError);
  }

  TEST_CASE("singular reduced noise is a configuration error") {
    auto m = fixtures::wmr_model(0.01, 0.0);
    EstimatorOptions o;
    CHECK_THROWS_AS(make_estimator(m, {0}, Vec::Zero(4), EstimatorKind::single, 0, -1, o),
                    EstimatorConfigError);
  }

  TEST_CASE("ekf step without dynamics or gain leaves the estimate") {
    auto m = SystemModel::linear(Mat::Zero(2, 2), Mat::Zero(2, 1), Mat::Identity(2, 2),
                                 Mat::Zero(2, 2), Mat::Identity(2, 2));
    EstimatorState est;
    est.xhat = (Vec(2) << 1, 2).finished();
    est.P = Mat::Identity(2, 2);
    est.K = Mat::Zero(2, 2);
    est.sensors = {0, 1};
    est.c_bar = m.c;
    est.nu_bar = m.nu;
    est.R_bar = Mat::Identity(2, 2);
    const auto out = ekf_step(est, Vec::Zero(1), (Vec(2) << 9, 9).finished(), 0.1, m);
    CHECK(out.xhat == est.xhat);
  }

  TEST_CASE("consistent initialisation tracks exactly under zero noise") {
    auto m = fixtures::wmr_model();
    const Vec x0 = (Vec(4) << -1, 0.5, 0.2, 0).finished();
    auto bank = make_bank(m, {{0}, {2}}, x0, EstimatorOptions{}, true);
    FaultScenario scen;
    Vec x = x0;
    for (int k = 0; k < 300; ++k) {
      const Vec u = (Vec(2) << std::sin(0.01 * k), 0.3).finished();
      const Vec y = measure(m, x, k * 0.01, scen, Vec::Zero(6), 0.01);
      step_bank(bank, u, y, 0.01, m);
      x = step_true_state(m, x, u, 0.01, Vec::Zero(4));
    }
    for (const auto& e : bank.singles) CHECK((e.xhat - x).norm() < 1e-12);
    for (const auto& e : bank.pairs) CHECK((e.xhat - x).norm() < 1e-12);
    CHECK((bank.all_sensors->xhat - x).norm() < 1e-12);
  }

  TEST_CASE("pairs use the union of patterns and go open loop when nothing is left") {
    auto m = SystemModel::linear(Mat::Zero(1, 1), Mat::Identity(1, 1), (Mat(2, 1) << 1, 1).finished(),
                                 0.1 * Mat::Identity(1, 1), 0.1 * Mat::Identity(2, 2));
    auto bank = make_bank(m, {{0}, {1}}, Vec::Zero(1), EstimatorOptions{}, false);
    REQUIRE(bank.pairs.size() == 1);
    CHECK(bank.pairs[0].open_loop());
    CHECK(bank.pairs[0].sensors.empty());
    CHECK(bank.singles[0].sensors == IndexSet{1});
    auto wmr = make_bank(fixtures::wmr_model(), {{0}, {2}, {4}}, Vec::Zero(4), EstimatorOptions{}, false);
    CHECK(wmr.pair(0, 2).sensors == IndexSet{1, 2, 3, 5});
    CHECK(wmr.pair_index(1, 2) == 2);
    CHECK(wmr.pair_index(2, 1) == 2);
  }

  TEST_CASE("constant gain equals steady-state gain and never changes") {
    auto m = fixtures::wmr_model();
    auto est = make_estimator(m, {0}, Vec::Zero(4), EstimatorKind::single, 0, -1, EstimatorOptions{});
    const Mat k0 = steady_state_gain(m.F, est.c_bar, m.sigma * m.sigma.transpose(), est.R_bar);
    CHECK((est.K - k0).lpNorm<Eigen::Infinity>() == 0.0);
    NoiseStream ns(3);
    for (int k = 0; k < 50; ++k) est = ekf_step(est, Vec::Zero(2), 0.01 * ns.draw(5), 0.01, m);
    CHECK((est.K - k0).lpNorm<Eigen::Infinity>() == 0.0);
  }

  TEST_CASE("riccati-ode mode keeps P symmetric PSD and approaches the steady state") {
    auto m = fixtures::wmr_model();
    EstimatorOptions o;
    o.mode = GainMode::riccati_ode;
    auto est = make_estimator(m, {0}, Vec::Zero(4), EstimatorKind::single, 0, -1, o);
    NoiseStream ns(9);
    for (int k = 0; k < 3000; ++k) {
      est = ekf_step(est, Vec::Zero(2), 0.01 * ns.draw(5), 0.01, m);
      CHECK((est.P - est.P.transpose()).lpNorm<Eigen::Infinity>() < 1e-9);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(est.P);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    const Mat kss = steady_state_gain(m.F, est.c_bar, m.sigma * m.sigma.transpose(), est.R_bar);
    CHECK((est.K - kss).lpNorm<Eigen::Infinity>() < 1e-3 * kss.lpNorm<Eigen::Infinity>());
  }

  TEST_CASE("residue examples") {
    EstimatorState est;
    est.xhat = Vec::Ones(1);
    est.c_bar = Mat::Identity(1, 1);
    est.sensors = {0};
    CHECK(residue(est, Vec::Constant(1, 3.0), 1.0, 0.0) == doctest::Approx(2.0));
    CHECK(residue(est, Vec::Constant(1, 1.0), 1.0, 0.0) == 0.0);
    est.residue = 4.0;
    CHECK(residue(est, Vec::Constant(1, 3.0), 1.0, 0.5) == doctest::Approx(3.0));
  }

  TEST_CASE("attacked channel raises the residue of estimators that keep it") {
    auto m = fixtures::wmr_model();
    const Vec x0 = Vec::Zero(4);
    auto bank = make_bank(m, {{0}, {2}}, x0, EstimatorOptions{}, false);
    FaultScenario scen;
    scen.sensor_patterns = {{0}, {2}};
    scen.active_sensor_fault = 1;
    scen.attack.kind = AttackKind::constant_bias;
    scen.attack.channels = {2};
    scen.attack.amplitude = 5.0;
    NoiseStream ns(4);
    Vec x = x0;
    for (int k = 0; k < 500; ++k) {
      const Vec w = ns.draw(4), v = ns.draw(6);
      const Vec y = measure(m, x, k * 0.01, scen, v, 0.01);
      step_bank(bank, Vec::Zero(2), y, 0.01, m);
      x = step_true_state(m, x, Vec::Zero(2), 0.01, w);
    }
    // Estimator 0 drops sensor 0 and keeps the attacked sensor 2.
    CHECK(bank.singles[0].residue > bank.singles[1].residue);
  }

  TEST_CASE("empirical quantile") {
    std::vector<double> v{5, 1, 4, 2, 3};
    CHECK(empirical_quantile(v, 1.0) == 5);
    CHECK(empirical_quantile(v, 0.5) == 3);
    CHECK(empirical_quantile(v, 0.0) == 1);
    CHECK(empirical_quantile(v, 0.975) == 5);
  }

  TEST_CASE("calibration: noise-free gives zero radii, more noise gives larger radii") {
    FaultScenario scen;
    scen.sensor_patterns = {{0}, {2}};
    CalibrationConfig cfg;
    cfg.n_runs = 50;
    cfg.horizon = 2.0;
    cfg.x0 = Vec::Zero(4);
    auto plant = fixtures::wmr_model(0.0, 0.0);
    CHECK_THROWS_AS(calibrate_gammas(plant, scen, cfg), EstimatorConfigError);
    cfg.estimator.design_sigma = 0.01 * Mat::Identity(4, 4);
    cfg.estimator.design_nu = 0.01 * Mat::Identity(6, 6);
    const auto exact = calibrate_gammas(plant, scen, cfg);
    CHECK(exact.gammas.norm() == 0.0);
    cfg.estimator = EstimatorOptions{};

    auto low = fixtures::wmr_model(0.01, 0.01);
    auto high = fixtures::wmr_model(0.01, 0.02);
    const auto c_low = calibrate_gammas(low, scen, cfg);
    const auto c_high = calibrate_gammas(high, scen, cfg);
    for (int i = 0; i < 2; ++i) {
      CHECK(c_low.gammas(i) > 0.0);
      CHECK(c_high.gammas(i) >= c_low.gammas(i));
    }
    CHECK(c_low.thetas(0, 1) == doctest::Approx(c_low.gammas(0) + c_low.gammas(1)));
    CHECK(c_low.thetas(0, 1) == c_low.thetas(1, 0));
    cfg.n_runs = 10;
    CHECK_THROWS_AS(calibrate_gammas(low, scen, cfg), ContractViolation);
  }
}
