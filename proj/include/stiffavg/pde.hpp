#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stiffavg/averaging.hpp"
#include "stiffavg/kernels.hpp"

namespace stiffavg {

enum class Boundary { periodic, homogeneous_dirichlet };

/// Cell-centred grid on [-L, L]^m, m in {1, 2}: node i sits at
/// -L + (i + 1/2) h with h = 2L/n. Dirichlet grids see zero outside.
struct Grid {
  int dim = 2;
  double half_width = 3.141592653589793;
  int n = 128;
  Boundary boundary = Boundary::periodic;

  double spacing() const { return 2.0 * half_width / n; }
  std::size_t size() const;
  double cell_volume() const;
  Vec node(std::size_t k) const;
  std::vector<Vec> nodes() const;
  kernels::StencilGrid stencil() const;
};

/// Validates and builds a grid (n >= 16, L > 0, m in {1, 2}).
Grid make_grid(int dim, double half_width, int n, Boundary boundary);

struct GridFunction {
  Grid grid;
  std::vector<double> values;
};

GridFunction sample_function(const Grid& grid, const std::function<double(const Vec&)>& f);
double l2_norm(const GridFunction& u);
double l2_distance(const GridFunction& a, const GridFunction& b);
double total_mass(const GridFunction& u);
/// Fraction of sum |u| carried by the outermost ring of nodes.
double boundary_mass_fraction(const GridFunction& u);

/// Symmetric node tensors for the face-flux operator.
std::vector<kernels::SymTensor> sample_tensors(const Grid& grid, const MatrixFieldFn& d);
std::vector<kernels::SymTensor> to_tensors(const std::vector<Mat>& m);

/// A u, the discretisation of -div(D grad u).
std::vector<double> apply_diffusion(const Grid& grid, const std::vector<kernels::SymTensor>& d,
                                    const std::vector<double>& u);
/// a_D(u, u) = sum over quadrant gradients of grad u . D grad u.
double diffusion_energy(const Grid& grid, const std::vector<kernels::SymTensor>& d, const std::vector<double>& u);

struct EnergyRecord {
  double t = 0.0;
  double half_l2_sq = 0.0;   // 1/2 ||u(t)||^2
  double dissipation = 0.0;  // cumulative sum of dt * a(u_mid, u_mid)
  double gradient_p = 0.0;   // cumulative sum of dt * |grad u_mid|_P^2 (when a weight is given)
};

struct SolveResult {
  std::vector<double> times;
  std::vector<GridFunction> states;
  std::vector<EnergyRecord> energy_trace;
  std::string method;
  double max_l2_increase = 0.0;      // max over steps of ||u_{k+1}|| - ||u_k||
  double max_energy_residual = 0.0;  // max |1/2||u_k||^2 + diss_k - 1/2||u_0||^2|
  double max_mass_drift = 0.0;       // periodic grids
  double max_boundary_fraction = 0.0;
  int total_krylov_iterations = 0;
  std::vector<std::string> warnings;
};

struct SolverOptions {
  double t_end = 1.0;
  double dt = 1e-3;
  int snapshots = 16;      // outputs at k t_end / snapshots, k = 0..snapshots
  double theta = 0.5;      // 0.5 = Crank-Nicolson
  double krylov_tol = 1e-13;
  int krylov_max_iter = 5000;
  int gmres_restart = 40;
  double stability_knob = 0.2;  // explicit transport needs dt <= knob * eps * h / max|b|
  int transport_order = 4;      // 2 or 4: order of the centred transport stencil
  std::optional<MatrixFieldFn> gradient_weight;  // P for the gradient diagnostic
};

/// d_t u - div(D grad u) + (1/eps) b.grad u = 0.
SolveResult solve_stiff(const VectorFieldSpec& field, const MatrixFieldFn& d, double eps, const GridFunction& u_in,
                        const SolverOptions& opts);

/// d_t v - div((G(t/eps)D) grad v) = 0, tensor frozen at t + dt/2 per step.
SolveResult solve_filtered(const VectorFieldSpec& field, const MatrixFieldFn& d, double eps,
                           const GridFunction& u_in, const SolverOptions& opts, const FlowIntegratorConfig& cfg);

/// d_t v - div(<D> grad v) = 0.
SolveResult solve_limit(const AverageResult& avg, const GridFunction& u_in, const SolverOptions& opts);

/// Same scheme with an arbitrary static tensor (shared by solve_limit and tests).
SolveResult solve_static(const MatrixFieldFn& d, const GridFunction& u_in, const SolverOptions& opts,
                         std::string method);

enum class Interpolation { bilinear, cubic };

/// Value of the grid function at an arbitrary point.
double interpolate(const GridFunction& u, const Vec& y, Interpolation kind = Interpolation::bilinear);

/// z -> u(Y(s; z)).
GridFunction pull_back(const GridFunction& state, const VectorFieldSpec& field, const FlowIntegratorConfig& cfg,
                       double s, Interpolation kind = Interpolation::bilinear);

/// Default stiff time step min(1e-3, eps/20).
inline double default_stiff_dt(double eps) { return eps / 20.0 < 1e-3 ? eps / 20.0 : 1e-3; }

}  // namespace stiffavg
