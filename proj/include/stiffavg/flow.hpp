#pragma once

#include <functional>

#include "stiffavg/vector_field.hpp"

namespace stiffavg {

enum class FlowMethod { rk4, analytic };

struct FlowIntegratorConfig {
  FlowMethod method = FlowMethod::rk4;
  double step = 1e-3;
  double tolerance = 1e-8;
};

/// Throws ConfigurationError when `cfg` cannot be used with `field`.
void validate_config(const FlowIntegratorConfig& cfg, const VectorFieldSpec& field);

struct FlowResult {
  double s = 0.0;
  Vec y0;
  Vec position;      // Y(s; y0)
  Mat jacobian;      // dY(s; y0)
  Mat jacobian_inv;  // dY(-s; Y(s; y0))
  double det_jacobian = 1.0;
};

/// Position and Jacobian only (no inverse, no determinant).
FlowSample flow_map(const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, double s, const Vec& y);

/// Full flow record. The inverse Jacobian comes from integrating backward
/// from Y(s;y), not from a matrix inversion.
FlowResult flow_advance(const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, double s, const Vec& y);

/// |Y(s; Y(t;y)) - Y(s+t; y)|.
double flow_group_check(const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, double s, double t,
                        const Vec& y);

/// |Y(T; y) - y| for a field with a declared period.
double periodicity_residual(const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, const Vec& y);

/// One point of an orbit: Y(s;y) and dY(s;y)^{-1} = dY(-s; Y(s;y)).
struct OrbitPoint {
  double s = 0.0;
  Vec position;
  Mat jacobian_inv;
};

/// Visits s_k = start + k*spacing, k = 0..count-1, along the orbit of y.
/// The rk4 path integrates position and inverse Jacobian jointly, the latter
/// through dK/ds = -K db(Y), sub-stepping so that no step exceeds cfg.step.
void sweep_orbit(const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, const Vec& y, double start,
                 double spacing, int count, const std::function<void(const OrbitPoint&)>& visit);

}  // namespace stiffavg
