#include <numbers>

#include "doctest.h"
#include "stiffavg/errors.hpp"
#include "test_util.hpp"

using namespace stiffavg;
using testutil::mat2;

TEST_CASE("rotation field values and period") {
  const auto f = rotation_field(1.0, 1.0);
  const Vec b = f.eval(make_vec({1.0, 0.0}));
  CHECK(b(0) == doctest::Approx(0.0));
  CHECK(b(1) == doctest::Approx(-1.0));
  CHECK(f.divergence(make_vec({1.0, 0.0})) == 0.0);
  REQUIRE(f.period);
  CHECK(*f.period == doctest::Approx(2.0 * std::numbers::pi));

  const auto g = rotation_field(1.0, 4.0);
  CHECK(*g.period == doctest::Approx(std::numbers::pi));
  CHECK(g.eval(make_vec({0.0, 0.0})).norm() == 0.0);
  CHECK(f.eval(make_vec({0.0, 0.0})).norm() == 0.0);
}

TEST_CASE("rotation field rejects non-positive parameters") {
  CHECK_THROWS_AS(rotation_field(0.0, 1.0), InvalidParameter);
  CHECK_THROWS_AS(rotation_field(1.0, -2.0), InvalidParameter);
  CHECK_THROWS_AS(rotation_frame(-1.0, 1.0), InvalidParameter);
}

TEST_CASE("gyrokinetic field") {
  const auto f = gyrokinetic_field(1.0);
  CHECK(f.dim == 6);
  const Vec b = f.eval(make_vec({0, 0, 0, 1, 0, 0}));
  const Vec expected = make_vec({1, 0, 0, 0, -1, 0});
  CHECK((b - expected).norm() == 0.0);

  const auto g = gyrokinetic_field(2.5);
  CHECK(g.eval(make_vec({0.3, -1.0, 2.0, 0, 0, 0})).norm() == 0.0);
  CHECK(*g.period == doctest::Approx(2.0 * std::numbers::pi / 2.5));

  double worst = 0.0;
  for (const Vec& y : sample_points(6, 3.0, 0, 100, 5)) worst = std::max(worst, std::abs(g.divergence(y)));
  CHECK(worst <= 1e-12);

  CHECK_THROWS_AS(gyrokinetic_field(0.0), InvalidParameter);
}

TEST_CASE("builtin fields: trace of the jacobian equals the divergence, both zero") {
  for (const auto& f : {rotation_field(1.0, 4.0), rotation_field(0.3, 2.0)}) {
    const auto pts = sample_points(2, 3.0, 10, 100, 1);
    const FieldValidation v = validate_field(f, pts);
    CHECK(v.ok);
    for (const Vec& y : pts) {
      CHECK(std::abs(f.jacobian(y).trace()) <= 1e-14);
      CHECK(std::abs(f.divergence(y)) <= 1e-14);
    }
  }
  const auto g = gyrokinetic_field(-1.5);
  CHECK(validate_field(g, sample_points(6, 2.0, 0, 100, 2)).ok);
}

TEST_CASE("vector lie bracket") {
  const auto b = rotation_field(1.0, 4.0);
  const auto b1 = constant_field(make_vec({1.0, 0.0}));
  const auto b2 = constant_field(make_vec({0.3, -2.0}));
  for (const Vec& y : sample_points(2, 2.0, 3, 5, 9)) {
    CHECK(lie_bracket_vectors(b, b, y).norm() <= 1e-14);
    // [b, b1] = -db b1 = -[[0, gamma], [-beta, 0]] (1, 0) = (0, beta).
    const Vec br = lie_bracket_vectors(b, b1, y);
    CHECK(br(0) == doctest::Approx(0.0));
    CHECK(br(1) == doctest::Approx(1.0));
    CHECK(lie_bracket_vectors(b1, b2, y).norm() == 0.0);
  }
  CHECK_THROWS_AS(lie_bracket_vectors(b, gyrokinetic_field(1.0), make_vec({1.0, 0.0})), DimensionMismatch);
}

TEST_CASE("rotation frame is in involution with b") {
  for (auto [beta, gamma] : {std::pair{1.0, 1.0}, std::pair{1.0, 4.0}, std::pair{2.0, 0.5}}) {
    const auto b = rotation_field(beta, gamma);
    const FrameSpec frame = rotation_frame(beta, gamma);
    const FrameValidation v = validate_frame(b, frame, sample_points(2, 2.0, 10, 0, 0));
    CHECK(v.ok);
    CHECK(v.max_involution_residual <= 1e-8);
    CHECK(v.max_pq_residual <= 1e-10);
  }
}

TEST_CASE("invariant weight commutes with the rotation flow") {
  const double beta = 1.0, gamma = 4.0;
  const Mat p = rotation_invariant_weight(beta, gamma);
  CHECK(testutil::max_abs(p - mat2(2.0, 0.0, 0.0, 0.5)) <= 1e-15);
  CHECK(p.determinant() == doctest::Approx(1.0));
  // [b, P] = -db P - P db^T for constant P.
  const Mat db = rotation_field(beta, gamma).jacobian(make_vec({0.4, 0.1}));
  CHECK(testutil::max_abs(db * p + p * db.transpose()) <= 1e-14);
  CHECK(testutil::max_abs(rotation_invariant_weight(3.0, 3.0) - Mat::Identity(2, 2)) <= 1e-15);
}

TEST_CASE("sample points are deterministic") {
  const auto a = sample_points(2, 1.0, 4, 7, 42);
  const auto b = sample_points(2, 1.0, 4, 7, 42);
  REQUIRE(a.size() == 23);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() == 0.0);
  CHECK(sample_points(6, 1.0, 4, 3, 1).size() == 3);
  CHECK_THROWS_AS(sample_points(7, 1.0, 0, 3, 1), InvalidParameter);
}
