#include <numbers>

#include "doctest.h"
#include "stiffavg/errors.hpp"
#include "test_util.hpp"

using namespace stiffavg;
using testutil::analytic;
using testutil::mat2;
using testutil::rk4;

namespace {

SolveResult two_states(const Grid& g) {
  SolveResult r;
  r.times = {0.0, 1.0};
  r.states = {sample_function(g, [](const Vec& y) { return y(0); }),
              sample_function(g, [](const Vec& y) { return 3.0 * y(0); })};
  return r;
}

// Gradient of exp(-(x^2/a^2 + y^2/b^2)/2) on the grid nodes.
std::vector<Vec> gaussian_gradient(const Grid& g, double a, double b) {
  std::vector<Vec> out;
  for (const Vec& y : g.nodes()) {
    const double e = std::exp(-0.5 * (y(0) * y(0) / (a * a) + y(1) * y(1) / (b * b)));
    out.push_back(make_vec({-y(0) / (a * a) * e, -y(1) / (b * b) * e}));
  }
  return out;
}

}  // namespace

TEST_CASE("rate fit") {
  const std::vector<double> eps{0.2, 0.1, 0.05};
  CHECK(rate_fit(eps, eps).rate == doctest::Approx(1.0));
  CHECK(rate_fit(eps, {0.04, 0.01, 0.0025}).rate == doctest::Approx(2.0));
  // Equally spaced log eps: the least-squares slope is (y3 - y1) / (x3 - x1).
  const double expected = std::log(1e-2 / 2.6e-3) / std::log(4.0);
  const RateFit f = rate_fit(eps, {1e-2, 5.2e-3, 2.6e-3});
  CHECK(f.rate == doctest::Approx(expected).epsilon(1e-12));
  CHECK(f.rate == doctest::Approx(0.9718).epsilon(1e-4));
  CHECK_THROWS_AS(rate_fit(eps, {1e-2, 0.0, 1e-3}), DegenerateFit);
  CHECK_THROWS_AS(rate_fit(eps, {1e-2, -1.0, 1e-3}), DegenerateFit);
  CHECK_THROWS_AS(rate_fit({0.1, 0.1, 0.1}, {1.0, 2.0, 3.0}), DegenerateFit);
  CHECK_THROWS_AS(rate_fit({0.2, 0.1}, {1.0, 2.0}), InvalidParameter);
}

TEST_CASE("state interpolation in time") {
  const Grid g = make_grid(1, 1.0, 16, Boundary::periodic);
  const SolveResult r = two_states(g);
  const GridFunction mid = state_at(r, 0.25);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(mid.values[i] == doctest::Approx(1.5 * g.node(i)(0)));
  CHECK_THROWS_AS(state_at(r, 1.5), OutOfDomain);
  CHECK_THROWS_AS(state_at(r, -0.1), OutOfDomain);
}

TEST_CASE("corrector evaluation vanishes for C = 0 and at s = 0") {
  const auto f = rotation_field(1.0, 1.0);
  const Grid g = make_grid(2, std::numbers::pi, 32, Boundary::periodic);
  SolveResult v;
  v.times = {0.0, 1.0};
  v.states = {testutil::gaussian(g, 0.3, 0.0, 0.6), testutil::gaussian(g, 0.3, 0.0, 0.8)};
  const auto zero = constant_matrix_field(Mat::Zero(2, 2));
  const auto c = constant_matrix_field(mat2(0.0, 0.5, 0.5, 0.0));
  for (double x : corrector_evaluate(zero, v, f, analytic(), 0.4, 1.1).values) CHECK(x == 0.0);
  for (double x : corrector_evaluate(c, v, f, analytic(), 0.4, 0.0).values) CHECK(std::abs(x) <= 1e-12);
}

TEST_CASE("corrector satisfies the cell equation along characteristics") {
  // d/ds of u1(t, s, Y(s; z)) equals div(G(s) L(C) grad v)(z) with L(C) = D - <D>.
  const auto f = rotation_field(1.0, 1.0);
  const auto d = constant_matrix_field(mat2(2.0, 0.0, 0.0, 0.0));
  const auto avg = ergodic_average(d, f, rk4());
  const CorrectorResult cr = corrector_solve(d, avg, f, rk4(), make_midpoint_quadrature(2, 2.0, 8));
  const Grid g = make_grid(2, std::numbers::pi, 32, Boundary::periodic);
  const auto v = testutil::gaussian(g, 0.3, -0.2, 0.6);
  const MatrixFieldFn residual{2, [&](const Vec& y) -> Mat { return d(y) - avg.average(y); }};
  const double h = 1e-3;
  for (double s : {0.0, 0.7}) {
    const auto wp = corrector_filtered(cr.corrector, v, f, rk4(), s + h);
    const auto wm = corrector_filtered(cr.corrector, v, f, rk4(), s - h);
    const auto rhs = apply_diffusion(g, sample_tensors(g, group_apply(s, residual, f, rk4())), v.values);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      err = std::max(err, std::abs((wp.values[i] - wm.values[i]) / (2 * h) + rhs[i]));
      scale = std::max(scale, std::abs(rhs[i]));
    }
    CHECK(err <= 1e-3 * scale);
  }
}

TEST_CASE("convergence study with a flow-invariant tensor") {
  // D = I and the unit rotation: <D> = D, u1 = 0 and v^eps = v up to discretization.
  const Grid g = make_grid(2, 16.0, 128, Boundary::homogeneous_dirichlet);
  ConvergenceSetup s;
  s.field = rotation_field(1.0, 1.0);
  s.cfg = analytic();
  s.d = identity_matrix_field(2);
  s.average = ergodic_average(s.d, s.field, s.cfg);
  s.p_weight = identity_matrix_field(2);
  s.u_in = testutil::gaussian(g, 0.5, 0.0, 3.0);
  s.t_end = 0.5;
  s.eps_ladder = {0.2, 0.1, 0.05};
  s.interpolation = Interpolation::cubic;
  const ConvergenceReport r = convergence_study(s);
  for (double e : r.errors_linf_l2) CHECK(e <= 5e-4);
  for (double e : r.errors_lab) CHECK(e <= 5e-4);
  CHECK(r.warnings.empty());

  // Below eps = 0.05 the default dt leaves a Crank-Nicolson phase error ~ T dt^2 / eps^3;
  // a step proportional to eps removes it.
  ConvergenceSetup fine = s;
  fine.eps_ladder = {0.1, 0.05, 0.025};
  fine.stiff_dt = [](double eps) { return eps / 50.0; };
  const ConvergenceReport rf = convergence_study(fine);
  for (double e : rf.errors_linf_l2) CHECK(e <= 5e-4);

  ConvergenceSetup bad = s;
  bad.eps_ladder = {0.1, 0.2, 0.05};
  CHECK_THROWS_AS(convergence_study(bad), InvalidParameter);
  bad.eps_ladder = {0.2, 0.1};
  CHECK_THROWS_AS(convergence_study(bad), InvalidParameter);
  bad = s;
  bad.use_corrector = true;
  CHECK_THROWS_AS(convergence_study(bad), ConfigurationError);
}

TEST_CASE("pairing with a t-constant test function matches the oscillatory integral") {
  // <M, G(s)D> = (M11 + M22) + (M11 - M22) cos 2s for D = diag(2,0) and the unit rotation,
  // so the deviation is |M11 - M22| eps |sin(2T/eps)| / 2.
  const auto f = rotation_field(1.0, 1.0);
  const auto d = constant_matrix_field(mat2(2.0, 0.0, 0.0, 0.0));
  const Grid g = make_grid(2, 4.0, 64, Boundary::periodic);
  const double t_end = 1.0;
  const auto grad = gaussian_gradient(g, 1.0, 0.5);
  TimeSampledField theta{{0.0, t_end}, {grad, grad}};
  Mat m = Mat::Zero(2, 2);
  for (const Vec& v : grad) m += g.cell_volume() * v * v.transpose();
  const std::vector<double> ladder{0.2, 0.1, 0.05};
  const auto avg = ergodic_average(d, f, analytic());
  const PairingReport r = two_scale_pairing(theta, theta, g, d, avg, f, analytic(), ladder);
  CHECK(r.limit_value == doctest::Approx(t_end * (m(0, 0) + m(1, 1))).epsilon(1e-8));
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double eps = ladder[i];
    const double expected = std::abs(m(0, 0) - m(1, 1)) * eps * std::abs(std::sin(2 * t_end / eps)) / 2;
    CHECK(r.deviations[i] == doctest::Approx(expected).epsilon(1e-3));
  }
  CHECK(r.deviations[2] / r.deviations[0] <= 0.5);

  // D flow-invariant: nothing oscillates.
  const auto id = identity_matrix_field(2);
  const PairingReport flat =
      two_scale_pairing(theta, theta, g, id, ergodic_average(id, f, analytic()), f, analytic(), ladder);
  for (double dev : flat.deviations) CHECK(dev <= 1e-9 * flat.limit_value);
}

TEST_CASE("pairing with a test function oscillating at the same scale does not converge") {
  // theta = w = phi (cos(t/eps), sin(t/eps)): the pairing with G(t/eps)D is 2 int phi^2 and the
  // limit pairing is int phi^2, for every eps.
  const auto f = rotation_field(1.0, 1.0);
  const auto d = constant_matrix_field(mat2(2.0, 0.0, 0.0, 0.0));
  const Grid g = make_grid(2, 4.0, 32, Boundary::periodic);
  const double t_end = 1.0;
  const auto avg = ergodic_average(d, f, analytic());
  std::vector<double> phi2;
  double mass = 0.0;
  for (const Vec& y : g.nodes()) {
    const double p = std::exp(-0.5 * y.squaredNorm());
    phi2.push_back(p);
    mass += g.cell_volume() * p * p;
  }
  for (double eps : {0.2, 0.05}) {
    TimeSampledField theta;
    const int n = static_cast<int>(std::ceil(t_end / (2 * std::numbers::pi * eps) * 256));
    for (int k = 0; k <= n; ++k) {
      const double t = t_end * k / n;
      theta.times.push_back(t);
      std::vector<Vec> vals;
      for (double p : phi2) vals.push_back(make_vec({p * std::cos(t / eps), p * std::sin(t / eps)}));
      theta.values.push_back(std::move(vals));
    }
    const PairingReport r = two_scale_pairing(theta, theta, g, d, avg, f, analytic(), {eps});
    CHECK(r.deviations[0] == doctest::Approx(t_end * mass).epsilon(1e-2));
  }
}

TEST_CASE("pairing rejects mismatched lattices") {
  const auto f = rotation_field(1.0, 1.0);
  const auto d = identity_matrix_field(2);
  const auto avg = ergodic_average(d, f, analytic());
  const Grid g = make_grid(2, 2.0, 16, Boundary::periodic);
  const auto grad = gaussian_gradient(g, 1.0, 1.0);
  TimeSampledField a{{0.0, 1.0}, {grad, grad}};
  TimeSampledField b{{0.0, 0.5, 1.0}, {grad, grad, grad}};
  CHECK_THROWS_AS(two_scale_pairing(a, b, g, d, avg, f, analytic(), {0.1}), DimensionMismatch);
  TimeSampledField shortv{{0.0, 1.0}, {grad, std::vector<Vec>(grad.begin(), grad.begin() + 10)}};
  CHECK_THROWS_AS(two_scale_pairing(shortv, shortv, g, d, avg, f, analytic(), {0.1}), DimensionMismatch);
  CHECK_THROWS_AS(two_scale_pairing(a, a, g, d, avg, f, analytic(), {}), InvalidParameter);
}
