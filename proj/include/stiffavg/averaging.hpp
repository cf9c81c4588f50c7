#pragma once

#include <optional>

#include "stiffavg/transport_group.hpp"

namespace stiffavg {

enum class AverageMode { one_period, cesaro };

struct AverageOptions {
  AverageMode mode = AverageMode::one_period;
  int s_nodes = 256;        // one_period: nodes per period; cesaro: trapezoid intervals on [0, S]
  double base_point = 0.0;  // average over [r, r + T] (one_period only)
  std::optional<double> cesaro_horizon;
};

struct AverageResult {
  MatrixFieldFn average;
  int quadrature_nodes_in_s = 0;
  AverageMode mode = AverageMode::one_period;
  std::optional<double> cesaro_horizon;
  bool materialized = false;
};

/// <A> = (1/T) int_0^T G(s)A ds by the periodic trapezoid rule (spectrally
/// accurate for smooth periodic integrands), or the Cesaro mean
/// (1/S) int_0^S G(s)A ds. The result is evaluated lazily: each point costs
/// one orbit sweep.
AverageResult ergodic_average(const MatrixFieldFn& a, const VectorFieldSpec& field, const FlowIntegratorConfig& cfg,
                              const AverageOptions& opts = {});

/// Samples a lazy average on the cell-centred n^m lattice of [-L, L]^m
/// (m in {1, 2}) and returns it as a bilinear interpolant.
AverageResult materialize(const AverageResult& avg, double half_width, int nodes_per_axis);

/// Any matrix field sampled on the lattice and turned into an interpolant.
MatrixFieldFn materialize_field(const MatrixFieldFn& a, double half_width, int nodes_per_axis);

/// Node-sampled matrix field on a cell-centred lattice; linear (m = 1) or
/// bilinear (m = 2) interpolation, constant beyond the outermost nodes.
MatrixFieldFn lattice_interpolant(int dim, double half_width, int nodes_per_axis, std::vector<Mat> values,
                                  bool symmetric);

struct PropertyCheck {
  bool applicable = true;  // hypothesis of the property holds for the input
  bool passed = true;
  double margin = 0.0;     // positive means satisfied with room
};

struct AveragePropertiesReport {
  PropertyCheck symmetry;     // margin = 1e-9 - max asymmetry
  PropertyCheck positivity;   // margin = min eig <A> (needs A >= 0)
  PropertyCheck coercivity;   // margin = min eig Q^{1/2}<A>Q^{1/2} - alpha
  PropertyCheck hq_contraction;
  PropertyCheck hq_inf_contraction;
  double hq_input = 0.0, hq_average = 0.0;
  double hq_inf_input = 0.0, hq_inf_average = 0.0;

  bool all_passed() const;
};

AveragePropertiesReport average_properties_check(const MatrixFieldFn& a, const AverageResult& avg,
                                                 const WeightedQuadrature& quad, double alpha);

struct CorrectorResult {
  MatrixFieldFn corrector;
  double residual = 0.0;   // max node-wise |L_fd(C) - (D - <D>)|
  double residual_l2 = 0.0;
  double mean_norm = 0.0;  // max over checked nodes of |<C>|
};

struct CorrectorOptions {
  int s_nodes = 256;
  double fd_step = 1e-3;
  int mean_check_nodes = 64;  // nodes on which <C> is re-averaged
};

/// C(z) = -(1/T) int_0^T int_0^s G(sigma)(D - <D>)(z) dsigma ds, evaluated
/// as (1/T) int_0^T (s - T/2) G(s)(D - <D>) ds with the sawtooth replaced by
/// its trigonometric interpolant (exact for the trapezoid nodes).
CorrectorResult corrector_solve(const MatrixFieldFn& d, const AverageResult& avg, const VectorFieldSpec& field,
                                const FlowIntegratorConfig& cfg, const WeightedQuadrature& quad,
                                const CorrectorOptions& opts = {});

}  // namespace stiffavg
