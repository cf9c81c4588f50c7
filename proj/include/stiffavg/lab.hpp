#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stiffavg/pde.hpp"

namespace stiffavg {

struct RateFit {
  double rate = 0.0;       // slope of log(error) against log(eps)
  double intercept = 0.0;  // log-space intercept
};

/// Least squares on (log eps, log error). Needs >= 3 points, all positive.
RateFit rate_fit(const std::vector<double>& eps, const std::vector<double>& errors);

/// Interpolates stored states linearly in t; OutOfDomain outside the range.
GridFunction state_at(const SolveResult& states, double t);

/// w(z) = div(G(s)C grad v)(z) - div(C grad v)(z), the corrector seen in
/// filtered coordinates: u1(t, s, Y(s; z)) = w(z).
GridFunction corrector_filtered(const MatrixFieldFn& c, const GridFunction& v, const VectorFieldSpec& field,
                                const FlowIntegratorConfig& cfg, double s);

/// u1(t, s, .) on the grid of `v_states`: corrector_filtered pulled back by Y(-s; .).
GridFunction corrector_evaluate(const MatrixFieldFn& c, const SolveResult& v_states, const VectorFieldSpec& field,
                                const FlowIntegratorConfig& cfg, double t, double s,
                                Interpolation kind = Interpolation::bilinear);

struct ConvergenceSetup {
  VectorFieldSpec field;
  FlowIntegratorConfig cfg;
  MatrixFieldFn d;
  AverageResult average;
  std::optional<MatrixFieldFn> corrector;  // required when use_corrector
  MatrixFieldFn p_weight;                  // weight of the gradient error
  GridFunction u_in;
  double t_end = 0.5;
  std::vector<double> eps_ladder;
  bool use_corrector = false;
  int snapshots = 16;
  // dt for the stiff solve as a function of eps; unset means default_stiff_dt.
  std::function<double(double)> stiff_dt;
  double limit_dt = 1e-3;
  int transport_order = 4;
  Interpolation interpolation = Interpolation::bilinear;
  double rate_target = 0.9;
  int tail = 3;  // number of ladder points in the rate fit
};

struct ConvergenceReport {
  std::vector<double> eps_ladder;
  std::vector<double> errors_linf_l2;   // filtered frame: sup_k |v^eps(t_k) - v(t_k)|
  std::vector<double> errors_lab;       // lab frame: sup_k |u^eps(t_k) - v(t_k, Y(-t_k/eps; .))|
  std::vector<double> errors_grad_xp;   // (int_0^T |grad(v^eps - v)|_P^2 dt)^{1/2}, trapezoid over snapshots
  std::vector<double> errors_corrected; // sup_k |v^eps - v - eps w|, when with_corrector
  RateFit fit;
  RateFit grad_fit;
  bool with_corrector = false;
  bool monotone = false;
  bool corrector_gain = false;
  bool pass = false;
  std::vector<std::string> warnings;
};

/// Runs solve_stiff for every eps against one shared solve_limit.
ConvergenceReport convergence_study(const ConvergenceSetup& setup);

/// Samples of a vector field on the nodes of a grid at the times of a lattice.
struct TimeSampledField {
  std::vector<double> times;
  std::vector<std::vector<Vec>> values;  // values[time][node]
};

struct PairingReport {
  std::vector<double> eps_ladder;
  std::vector<double> pairing_values;
  double limit_value = 0.0;
  std::vector<double> deviations;
};

struct PairingOptions {
  // Sub-samples per period of the fast variable t/eps; theta and w are
  // interpolated linearly between lattice times.
  int samples_per_period = 48;
};

/// int_0^T <theta(t) (x) w(t), G(t/eps) D> dt for each eps, and the same with <D>.
PairingReport two_scale_pairing(const TimeSampledField& theta, const TimeSampledField& w, const Grid& grid,
                                const MatrixFieldFn& d, const AverageResult& avg, const VectorFieldSpec& field,
                                const FlowIntegratorConfig& cfg, const std::vector<double>& eps_ladder,
                                const PairingOptions& opts = {});

}  // namespace stiffavg
