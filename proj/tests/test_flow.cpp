#include <numbers>
#include <random>

#include "doctest.h"
#include "stiffavg/errors.hpp"
#include "test_util.hpp"

using namespace stiffavg;
using testutil::analytic;
using testutil::max_abs;
using testutil::mat2;
using testutil::rk4;

TEST_CASE("flow at s = 0 is the identity") {
  const Vec y = make_vec({0.7, -1.2});
  for (const auto& cfg : {rk4(), analytic()}) {
    const FlowResult r = flow_advance(rotation_field(1.0, 4.0), cfg, 0.0, y);
    CHECK((r.position - y).norm() == 0.0);
    CHECK(max_abs(r.jacobian - Mat::Identity(2, 2)) == 0.0);
  }
}

TEST_CASE("quarter turn of the unit rotation") {
  const auto f = rotation_field(1.0, 1.0);
  for (const auto& cfg : {rk4(), analytic()}) {
    const FlowResult r = flow_advance(f, cfg, std::numbers::pi / 2, make_vec({1.0, 0.0}));
    CHECK((r.position - make_vec({0.0, -1.0})).norm() <= 1e-10);
    CHECK(max_abs(r.jacobian - mat2(0, 1, -1, 0)) <= 1e-10);
  }
}

TEST_CASE("gyrokinetic flow returns after one cyclotron period") {
  const auto f = gyrokinetic_field(1.0);
  const Vec y = make_vec({0.3, -0.2, 1.1, 0.8, -0.5, 0.4});
  for (const auto& cfg : {rk4(), analytic()}) {
    const FlowResult r = flow_advance(f, cfg, 2.0 * std::numbers::pi, y);
    CHECK((r.position - y).norm() <= 1e-9);
    CHECK(std::abs(r.det_jacobian - 1.0) <= 1e-9);
  }
  // closed form written out in the test
  const auto g = gyrokinetic_field(2.0);
  const FlowResult r = flow_advance(g, rk4(), 0.9, y);
  CHECK((r.position - testutil::gyrokinetic_flow_matrix(2.0, 0.9) * y).norm() <= 1e-10);
  CHECK(max_abs(r.jacobian - testutil::gyrokinetic_flow_matrix(2.0, 0.9)) <= 1e-10);
}

TEST_CASE("rk4 flow matches the hand-written rotation flow") {
  const double beta = 1.0, gamma = 4.0;
  const auto f = rotation_field(beta, gamma);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> us(-3.0, 3.0), uy(-2.0, 2.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double s = us(rng);
    const Vec y = make_vec({uy(rng), uy(rng)});
    const Vec exact = testutil::rotation_flow_matrix(beta, gamma, s) * y;
    worst = std::max(worst, (flow_advance(f, rk4(), s, y).position - exact).norm());
    worst = std::max(worst, (flow_advance(f, analytic(), s, y).position - exact).norm());
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("measure preservation and inverse consistency") {
  const auto f = rotation_field(1.0, 4.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> us(-2.0, 2.0), uy(-2.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    const double s = us(rng);
    const Vec y = make_vec({uy(rng), uy(rng)});
    const FlowResult r = flow_advance(f, rk4(1e-3), s, y);
    CHECK(std::abs(r.det_jacobian - 1.0) <= 1e-8);
    CHECK(max_abs(r.jacobian * r.jacobian_inv - Mat::Identity(2, 2)) <= 1e-8);
    const FlowResult back = flow_advance(f, rk4(1e-3), -s, r.position);
    CHECK(max_abs(back.jacobian * r.jacobian - Mat::Identity(2, 2)) <= 1e-8);
  }
}

TEST_CASE("group residual") {
  const auto f = rotation_field(1.0, 1.0);
  const Vec y = make_vec({0.4, 1.3});
  CHECK(flow_group_check(f, rk4(), 0.0, 0.0, y) == 0.0);
  CHECK(flow_group_check(f, rk4(1e-3), std::numbers::pi, std::numbers::pi, y) <= 1e-8);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto g = rotation_field(1.0, 4.0);
  for (int k = 0; k < 20; ++k) {
    const double s = u(rng), t = u(rng);
    CHECK(flow_group_check(g, rk4(1e-3), s, t, make_vec({u(rng), u(rng)})) <= 1e-7);
  }
}

TEST_CASE("rk4 is fourth order") {
  const double beta = 1.0, gamma = 4.0, s = 3.0;
  const auto f = rotation_field(beta, gamma);
  const Vec y = make_vec({1.0, 0.5});
  const Vec exact = testutil::rotation_flow_matrix(beta, gamma, s) * y;
  const double e1 = (flow_advance(f, rk4(0.1), s, y).position - exact).norm();
  const double e2 = (flow_advance(f, rk4(0.05), s, y).position - exact).norm();
  CHECK(e1 / e2 >= 14.0);
}

TEST_CASE("flow configuration and integration errors") {
  CHECK_THROWS_AS(flow_advance(linear_field(mat2(0, 1, 0, 0)), analytic(), 1.0, make_vec({1.0, 0.0})),
                  ConfigurationError);
  CHECK_THROWS_AS(flow_advance(rotation_field(1, 1), rk4(-1.0), 1.0, make_vec({1.0, 0.0})), ConfigurationError);
  CHECK_THROWS_AS(flow_advance(rotation_field(1, 1), rk4(), 1.0, make_vec({1.0, 0.0, 2.0})), DimensionMismatch);
  CHECK_THROWS_AS(periodicity_residual(linear_field(mat2(0, 1, 0, 0)), rk4(), make_vec({1.0, 0.0})),
                  ConfigurationError);

  // b = 1 until y = 1.5, NaN beyond: the failure must carry a flow time near 1.5.
  VectorFieldSpec bad;
  bad.dim = 1;
  bad.eval = [](const Vec& y) { return make_vec({y(0) > 1.5 ? std::nan("") : 1.0}); };
  bad.jacobian = [](const Vec&) -> Mat { return Mat::Zero(1, 1); };
  bad.divergence = [](const Vec&) { return 0.0; };
  bad.name = "blows up";
  try {
    flow_advance(bad, rk4(1e-2), 3.0, make_vec({0.0}));
    FAIL("expected IntegrationFailure");
  } catch (const IntegrationFailure& e) {
    CHECK(e.flow_time() > 1.4);
    CHECK(e.flow_time() < 1.7);
  }
}

TEST_CASE("periodicity residual of builtin flows") {
  CHECK(periodicity_residual(rotation_field(1.0, 4.0), rk4(1e-3), make_vec({1.0, -0.3})) <= 1e-9);
  CHECK(periodicity_residual(gyrokinetic_field(3.0), rk4(1e-3), make_vec({0.1, 0.2, 0.3, 1.0, -1.0, 0.5})) <=
        1e-9);
}

TEST_CASE("orbit sweep visits the requested flow times") {
  const auto f = rotation_field(1.0, 4.0);
  const Vec y = make_vec({0.5, 0.25});
  std::vector<double> seen;
  sweep_orbit(f, rk4(1e-3), y, 0.2, 0.3, 5, [&](const OrbitPoint& p) {
    seen.push_back(p.s);
    const Mat exact_inv = testutil::rotation_flow_matrix(1.0, 4.0, -p.s);
    CHECK((p.position - testutil::rotation_flow_matrix(1.0, 4.0, p.s) * y).norm() <= 1e-9);
    CHECK(max_abs(p.jacobian_inv - exact_inv) <= 1e-9);
  });
  REQUIRE(seen.size() == 5);
  CHECK(seen.back() == doctest::Approx(1.4));
}
