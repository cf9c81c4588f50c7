#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stiffavg/linalg.hpp"

namespace stiffavg {

enum class FieldKind { analytic_builtin, user_defined };

/// Position and Jacobian of a characteristic at one flow time.
struct FlowSample {
  Vec position;
  Mat jacobian;
};

/// The stiff drift b. Immutable after construction; every callable must be
/// re-entrant since quadratures evaluate it from many threads.
struct VectorFieldSpec {
  int dim = 0;
  std::function<Vec(const Vec&)> eval;
  std::function<Mat(const Vec&)> jacobian;
  std::function<double(const Vec&)> divergence;
  double growth_bound = 0.0;       // |b(y)| <= growth_bound * (1 + |y|)
  std::optional<double> period;    // smallest period of the flow, if periodic
  FieldKind kind = FieldKind::user_defined;
  std::string name;
  // (s, y) -> (Y(s;y), dY(s;y)); only builtins provide it.
  std::function<FlowSample(double, const Vec&)> closed_form_flow;

  bool has_closed_form() const { return static_cast<bool>(closed_form_flow); }
};

/// b(y) = (gamma*y2, -beta*y1), period 2*pi/sqrt(beta*gamma).
VectorFieldSpec rotation_field(double beta, double gamma);

/// b(x,v) = (v1, v2, 0, wc*v2, -wc*v1, 0) on R^6, period 2*pi/|wc|.
VectorFieldSpec gyrokinetic_field(double omega_c);

/// b(y) = M y. Divergence trace(M); no closed-form flow attached.
VectorFieldSpec linear_field(const Mat& m, std::string name = "linear");

/// b(y) = c.
VectorFieldSpec constant_field(const Vec& c, std::string name = "constant");

/// (a.grad)c - (c.grad)a at y, from the analytic Jacobians.
Vec lie_bracket_vectors(const VectorFieldSpec& a, const VectorFieldSpec& c, const Vec& y);

/// Involutive frame b_1..b_m: columns of R^{-1}, with Q = R^T R, P = Q^{-1}.
struct FrameSpec {
  std::vector<VectorFieldSpec> fields;
  std::function<Mat(const Vec&)> r_inverse;
  std::function<Mat(const Vec&)> r;
  std::function<Mat(const Vec&)> q;
  std::function<Mat(const Vec&)> p;
};

FrameSpec make_frame(std::vector<VectorFieldSpec> fields);

/// Frame {y, b(y)} for the rotation flow. Both are linear fields commuting
/// with the rotation generator, hence in involution with b for any
/// beta, gamma; the frame degenerates at the origin only.
FrameSpec rotation_frame(double beta, double gamma);

/// Constant SPD weight P with [b, P] = 0 for the rotation field:
/// P = diag(gamma, beta) / sqrt(beta*gamma). Equals I when beta == gamma.
Mat rotation_invariant_weight(double beta, double gamma);

/// Deterministic sample set: a lattice_per_axis^dim lattice on
/// [-half_width, half_width]^dim (cell centres) plus n_random seeded points.
/// For dim > 2 the lattice is skipped and only random points are produced.
std::vector<Vec> sample_points(int dim, double half_width, int lattice_per_axis, int n_random,
                               std::uint64_t seed);

struct FieldValidation {
  double max_div_trace_gap = 0.0;
  double max_growth_ratio = 0.0;  // max |b| / (1+|y|) / growth_bound
  bool ok = true;
  std::vector<std::string> failures;
};

/// Checks div == tr(jacobian) to 1e-10 and the linear growth bound.
FieldValidation validate_field(const VectorFieldSpec& field, const std::vector<Vec>& points);

struct FrameValidation {
  double min_abs_det = 0.0;
  double max_pq_residual = 0.0;
  double max_involution_residual = 0.0;
  bool ok = true;
  std::vector<std::string> failures;
};

FrameValidation validate_frame(const VectorFieldSpec& b, const FrameSpec& frame,
                               const std::vector<Vec>& points, double involution_tol = 1e-8);

}  // namespace stiffavg
