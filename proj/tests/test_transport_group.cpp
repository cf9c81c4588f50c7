#include <numbers>
#include <random>

#include "doctest.h"
#include "stiffavg/errors.hpp"
#include "test_util.hpp"

using namespace stiffavg;
using testutil::analytic;
using testutil::mat2;
using testutil::max_abs;
using testutil::rk4;

namespace {

// Symmetric quadratic polynomial times the rotation-invariant envelope exp(-|y|^2/2).
MatrixFieldFn enveloped_polynomial(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Mat> coef(6, Mat::Zero(2, 2));
  for (Mat& c : coef) {
    c << u(rng), u(rng), 0.0, u(rng);
    c(1, 0) = c(0, 1);
  }
  MatrixFieldFn a;
  a.dim = 2;
  a.eval = [coef](const Vec& y) -> Mat {
    const double x = y(0), z = y(1);
    const Mat p = coef[0] + x * coef[1] + z * coef[2] + x * x * coef[3] + x * z * coef[4] + z * z * coef[5];
    return std::exp(-0.5 * (x * x + z * z)) * p;
  };
  return a;
}

}  // namespace

TEST_CASE("G(0) is the identity and G(s)I = I for the unit rotation") {
  const auto f = rotation_field(1.0, 1.0);
  const auto a = enveloped_polynomial(1);
  const auto g0 = group_apply(0.0, a, f, rk4());
  const auto gi = group_apply(1.234, identity_matrix_field(2), f, rk4());
  for (const Vec& y : sample_points(2, 2.0, 4, 6, 3)) {
    CHECK(max_abs(g0(y) - a(y)) <= 1e-15);
    CHECK(max_abs(gi(y) - Mat::Identity(2, 2)) <= 1e-9);
  }
}

TEST_CASE("G(pi/4) diag(1,0) for beta = 1, gamma = 4") {
  // J = dY(-s) = [[cos 2s, -2 sin 2s], [sin 2s / 2, cos 2s]] = [[0, -2], [1/2, 0]] at s = pi/4,
  // so J diag(1,0) J^T = diag(0, 1/4).
  const auto f = rotation_field(1.0, 4.0);
  const auto g = group_apply(std::numbers::pi / 4, constant_matrix_field(mat2(1, 0, 0, 0)), f, rk4());
  const Mat expected = mat2(0.0, 0.0, 0.0, 0.25);
  for (const Vec& y : sample_points(2, 1.5, 3, 4, 8)) CHECK(max_abs(g(y) - expected) <= 1e-9);
  const auto ga = group_apply(std::numbers::pi / 4, constant_matrix_field(mat2(1, 0, 0, 0)), f, analytic());
  CHECK(max_abs(ga(make_vec({0.2, 0.1})) - expected) <= 1e-14);
}

TEST_CASE("H_Q norms on simple fields") {
  const auto quad = make_midpoint_quadrature(2, 0.5, 8);  // unit square
  CHECK(quad.volume() == doctest::Approx(1.0));
  CHECK(hq_norm(constant_matrix_field(Mat::Zero(2, 2)), quad) == 0.0);
  CHECK(hq_norm(identity_matrix_field(2), quad) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(hq_inf_norm(constant_matrix_field(Mat::Zero(2, 2)), quad) == 0.0);
  CHECK(hq_inf_norm(constant_matrix_field(mat2(3, 0, 0, 0)), quad) == doctest::Approx(3.0));
  CHECK(hq_inner(identity_matrix_field(2), constant_matrix_field(mat2(1, 0, 0, 2)), quad) ==
        doctest::Approx(3.0));
}

TEST_CASE("X_P norm") {
  const auto quad = make_midpoint_quadrature(2, 0.5, 8);
  std::vector<Vec> zero(quad.nodes.size(), make_vec({0.0, 0.0}));
  std::vector<Vec> ex(quad.nodes.size(), make_vec({1.0, 0.0}));
  CHECK(xp_norm(zero, quad) == 0.0);
  CHECK(xp_norm(ex, quad) == doctest::Approx(1.0));

  const auto big = make_midpoint_quadrature(2, 4.0, 64);
  std::vector<Vec> grad;
  double plain = 0.0;
  const double h2 = std::pow(8.0 / 64, 2);
  for (const Vec& y : big.nodes) {
    const double e = std::exp(-0.5 * y.squaredNorm());
    grad.push_back(-e * y);
    plain += h2 * e * e * y.squaredNorm();
  }
  CHECK(std::abs(xp_norm(grad, big) - std::sqrt(plain)) <= 1e-10);
  CHECK_THROWS_AS(xp_norm(ex, big), DimensionMismatch);
}

TEST_CASE("G(s) is unitary in H_Q and H_Q^inf for the unit rotation") {
  const auto f = rotation_field(1.0, 1.0);
  const auto quad = make_midpoint_quadrature(2, 6.0, 64);
  const auto a = enveloped_polynomial(4);
  for (double s : {0.3, 1.7}) {
    const auto g = group_apply(s, a, f, analytic());
    CHECK(std::abs(hq_norm(g, quad) - hq_norm(a, quad)) <= 1e-6);
  }
  // Radial envelope times a constant matrix: node-wise sup norms agree exactly.
  const Mat m = mat2(2.0, 0.7, 0.7, -1.0);
  const auto b = MatrixFieldFn{2, [m](const Vec& y) -> Mat { return std::exp(-0.5 * y.squaredNorm()) * m; }};
  for (double s : {0.3, 1.7}) {
    const auto g = group_apply(s, b, f, rk4());
    CHECK(std::abs(hq_inf_norm(g, quad) - hq_inf_norm(b, quad)) <= 1e-6);
  }
}

TEST_CASE("group law, symmetry and positivity at sampled nodes") {
  const auto f = rotation_field(1.0, 4.0);
  const auto a = constant_matrix_field(mat2(2.0, 0.3, 0.3, 0.5));
  const auto gs = group_apply(0.4, group_apply(0.9, a, f, rk4()), f, rk4());
  const auto gst = group_apply(1.3, a, f, rk4());
  for (const Vec& y : sample_points(2, 2.0, 4, 4, 2)) {
    CHECK(max_abs(gs(y) - gst(y)) <= 1e-6);
    CHECK(asymmetry(gst(y)) <= 1e-9);
    CHECK(min_eigenvalue(gst(y)) >= -1e-9);
  }
}

TEST_CASE("matrix lie bracket") {
  const auto c = constant_field(make_vec({1.0, 2.0}));
  CHECK(max_abs(lie_bracket_matrix(c, constant_matrix_field(mat2(1, 2, 2, 5)), make_vec({0.1, 0.2}))) == 0.0);
  // db = [[0,1],[-1,0]] is antisymmetric, so [b, I] = -(db + db^T) = 0.
  CHECK(max_abs(lie_bracket_matrix(rotation_field(1, 1), identity_matrix_field(2), make_vec({0.5, -1.0}))) <=
        1e-15);

  MatrixFieldFn no_derivative{2, [](const Vec&) -> Mat { return Mat::Identity(2, 2); }};
  CHECK_THROWS_AS(lie_bracket_matrix(rotation_field(1, 1), no_derivative, make_vec({0.0, 0.0})), CapabilityError);

  // [b, P] = 0 for the invariant weight, and then G(s)P = P.
  const auto b = rotation_field(1.0, 4.0);
  const auto p = constant_matrix_field(rotation_invariant_weight(1.0, 4.0));
  CHECK(max_abs(lie_bracket_matrix(b, p, make_vec({0.3, 0.8}))) <= 1e-14);
  for (double s : {0.2, 1.1, 2.9}) {
    const auto g = group_apply(s, p, b, rk4());
    for (const Vec& y : sample_points(2, 2.0, 3, 0, 0)) CHECK(max_abs(g(y) - p(y)) <= 1e-6);
  }
}

TEST_CASE("generator residual") {
  const auto f = rotation_field(1.0, 4.0);
  const auto quad = make_midpoint_quadrature(2, 2.0, 8);
  const auto zero = constant_matrix_field(Mat::Zero(2, 2));
  const GeneratorResidual r0 = generator_residual(zero, zero, f, rk4(), 1e-3, quad);
  CHECK(r0.l2 == 0.0);
  CHECK(r0.max_node == 0.0);
  CHECK_THROWS_AS(generator_residual(zero, zero, f, rk4(), 0.0, quad), InvalidParameter);
}

TEST_CASE("weight errors name the node") {
  const auto q = constant_matrix_field(mat2(1, 0, 0, -1));
  const auto quad = make_midpoint_quadrature(2, 1.0, 4, q, q);
  try {
    hq_norm(identity_matrix_field(2), quad);
    FAIL("expected WeightMatrixError");
  } catch (const WeightMatrixError& e) {
    CHECK(e.node() == 0);
  }
  CHECK_THROWS_AS(make_midpoint_quadrature(3, 1.0, 4), InvalidParameter);
}

TEST_CASE("quadrature weights sum to the box volume") {
  const auto quad = make_midpoint_quadrature(2, 4.0, 64);
  double s = 0.0;
  for (double w : quad.weights) {
    CHECK(w > 0.0);
    s += w;
  }
  CHECK(s == doctest::Approx(64.0));
  CHECK(make_midpoint_quadrature(1, 3.0, 10).volume() == doctest::Approx(6.0));
}
