#include "stiffavg/pde.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "parallel.hpp"
#include "stiffavg/errors.hpp"
#include "stiffavg/krylov.hpp"

namespace stiffavg {

namespace k = kernels::omp;

std::size_t Grid::size() const {
  return dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
}

double Grid::cell_volume() const { return dim == 1 ? spacing() : spacing() * spacing(); }

Vec Grid::node(std::size_t idx) const {
  const double h = spacing();
  Vec y(dim);
  const std::size_t nn = static_cast<std::size_t>(n);
  y(0) = -half_width + (static_cast<double>(idx % nn) + 0.5) * h;
  if (dim == 2) y(1) = -half_width + (static_cast<double>(idx / nn) + 0.5) * h;
  return y;
}

std::vector<Vec> Grid::nodes() const {
  std::vector<Vec> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = node(i);
  return out;
}

kernels::StencilGrid Grid::stencil() const { return {dim, n, spacing(), boundary == Boundary::periodic}; }

Grid make_grid(int dim, double half_width, int n, Boundary boundary) {
  if (dim < 1 || dim > 2) throw InvalidParameter("make_grid: dim must be 1 or 2");
  if (n < 16) throw InvalidParameter("make_grid: n must be >= 16");
  if (!(half_width > 0.0) || !std::isfinite(half_width)) throw InvalidParameter("make_grid: L must be positive");
  return Grid{dim, half_width, n, boundary};
}

namespace {

void check_function(const GridFunction& u, const char* where) {
  if (u.values.size() != u.grid.size()) {
    throw DimensionMismatch(std::string(where) + ": value count does not match the grid");
  }
  for (double v : u.values) {
    if (!std::isfinite(v)) throw InvalidParameter(std::string(where) + ": non-finite value");
  }
}

bool same_grid(const Grid& a, const Grid& b) {
  return a.dim == b.dim && a.n == b.n && a.half_width == b.half_width && a.boundary == b.boundary;
}

kernels::SymTensor to_sym(const Mat& m) {
  if (m.rows() == 1) return {m(0, 0), 0.0, 0.0};
  return {m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), m(1, 1)};
}

double sum(const std::vector<double>& u) { return std::accumulate(u.begin(), u.end(), 0.0); }

// Advances u0 -> u1 over one step whose midpoint time is the argument;
// returns the Krylov iteration count.
using StepFn = std::function<int(double, const std::vector<double>&, std::vector<double>&)>;
// a(u, u) with the tensors of the step just taken (weighted by h^m).
using FormFn = std::function<double(const std::vector<double>&)>;

SolveResult time_loop(const GridFunction& u_in, const SolverOptions& opts, std::string method, const StepFn& step,
                      const FormFn& form, double dt) {
  const Grid& grid = u_in.grid;
  const double vol = grid.cell_volume();
  const int steps_per_snapshot = std::max(1, static_cast<int>(std::ceil(opts.t_end / (opts.snapshots * dt) - 1e-9)));

  std::vector<kernels::SymTensor> p_tensors;
  if (opts.gradient_weight) p_tensors = sample_tensors(grid, *opts.gradient_weight);
  const kernels::StencilGrid sg = grid.stencil();

  SolveResult res;
  res.method = std::move(method);
  std::vector<double> u = u_in.values;
  std::vector<double> next(u.size()), mid(u.size());
  const double e0 = 0.5 * vol * k::dot(u, u);
  const double mass0 = vol * sum(u);
  double dissipation = 0.0, grad_p = 0.0;
  double norm_prev = std::sqrt(2.0 * e0);
  const bool periodic = grid.boundary == Boundary::periodic;

  auto snapshot = [&](double t) {
    res.times.push_back(t);
    res.states.push_back(GridFunction{grid, u});
    if (!periodic) {
      const double frac = boundary_mass_fraction(res.states.back());
      res.max_boundary_fraction = std::max(res.max_boundary_fraction, frac);
    }
  };
  res.energy_trace.push_back({0.0, e0, 0.0, 0.0});
  snapshot(0.0);

  bool warned = false;
  for (int s = 0; s < opts.snapshots; ++s) {
    for (int j = 0; j < steps_per_snapshot; ++j) {
      const int idx = s * steps_per_snapshot + j;
      const double t0 = idx * dt;
      res.total_krylov_iterations += step(t0 + 0.5 * dt, u, next);
      for (std::size_t i = 0; i < u.size(); ++i) mid[i] = 0.5 * (u[i] + next[i]);
      dissipation += dt * form(mid);
      if (!p_tensors.empty()) grad_p += dt * k::diffusion_form(sg, p_tensors, mid, mid);
      u.swap(next);

      const double e = 0.5 * vol * k::dot(u, u);
      const double nrm = std::sqrt(2.0 * e);
      res.max_l2_increase = std::max(res.max_l2_increase, nrm - norm_prev);
      norm_prev = nrm;
      res.max_energy_residual = std::max(res.max_energy_residual, std::abs(e + dissipation - e0));
      if (periodic) res.max_mass_drift = std::max(res.max_mass_drift, std::abs(vol * sum(u) - mass0));
      res.energy_trace.push_back({t0 + dt, e, dissipation, grad_p});
      for (double v : u) {
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << res.method << ": non-finite state at t = " << t0 + dt;
          throw SolverError(os.str(), res.total_krylov_iterations);
        }
      }
    }
    snapshot((s + 1) * steps_per_snapshot * dt);
    if (!periodic && !warned && res.max_boundary_fraction > 1e-6) {
      std::ostringstream os;
      os << res.method << ": boundary mass fraction " << res.max_boundary_fraction
         << " exceeds 1e-6; Dirichlet truncation is no longer negligible";
      res.warnings.push_back(os.str());
      warned = true;
    }
  }
  return res;
}

void validate_options(const SolverOptions& opts) {
  if (!(opts.t_end > 0.0) || !std::isfinite(opts.t_end)) throw InvalidParameter("solve: t_end must be positive");
  if (!(opts.dt > 0.0) || !std::isfinite(opts.dt)) throw InvalidParameter("solve: dt must be positive");
  if (opts.snapshots < 1) throw InvalidParameter("solve: snapshots must be >= 1");
  if (!(opts.theta >= 0.0 && opts.theta <= 1.0)) throw InvalidParameter("solve: theta must lie in [0, 1]");
  if (!(opts.krylov_tol > 0.0)) throw InvalidParameter("solve: krylov_tol must be positive");
  if (opts.transport_order != 2 && opts.transport_order != 4) {
    throw InvalidParameter("solve: transport_order must be 2 or 4");
  }
}

// dt actually used: t_end split into a whole number of steps per snapshot.
double effective_dt(const SolverOptions& opts) {
  const int per = std::max(1, static_cast<int>(std::ceil(opts.t_end / (opts.snapshots * opts.dt) - 1e-9)));
  return opts.t_end / (static_cast<double>(per) * opts.snapshots);
}

// Theta step for du/dt = -A u with A symmetric positive semidefinite.
int diffusion_step(const kernels::StencilGrid& sg, const std::vector<kernels::SymTensor>& d, double dt,
                   const SolverOptions& opts, const std::vector<double>& u0, std::vector<double>& u1) {
  const std::size_t n = u0.size();
  std::vector<double> rhs(n);
  k::diffusion_apply(sg, d, u0, rhs);
  k::axpby(1.0, u0, -(1.0 - opts.theta) * dt, rhs);
  if (opts.theta == 0.0) {
    u1 = rhs;
    return 0;
  }
  const double c = opts.theta * dt;
  LinearOperator op = [&](std::span<const double> x, std::span<double> y) {
    k::diffusion_apply(sg, d, x, y);
    k::axpby(1.0, x, c, y);
  };
  u1 = u0;
  return conjugate_gradient(op, rhs, u1, opts.krylov_tol, opts.krylov_max_iter).iterations;
}

}  // namespace

GridFunction sample_function(const Grid& grid, const std::function<double(const Vec&)>& f) {
  GridFunction u{grid, std::vector<double>(grid.size())};
  detail::parallel_for(u.values.size(), [&](std::size_t i) { u.values[i] = f(grid.node(i)); });
  return u;
}

double l2_norm(const GridFunction& u) { return std::sqrt(u.grid.cell_volume() * k::dot(u.values, u.values)); }

double l2_distance(const GridFunction& a, const GridFunction& b) {
  if (!same_grid(a.grid, b.grid) || a.values.size() != b.values.size()) {
    throw DimensionMismatch("l2_distance: grids differ");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
  return std::sqrt(a.grid.cell_volume() * s);
}

double total_mass(const GridFunction& u) { return u.grid.cell_volume() * sum(u.values); }

double boundary_mass_fraction(const GridFunction& u) {
  const int n = u.grid.n;
  double all = 0.0, ring = 0.0;
  for (std::size_t idx = 0; idx < u.values.size(); ++idx) {
    const double a = std::abs(u.values[idx]);
    all += a;
    const int i = static_cast<int>(idx % static_cast<std::size_t>(n));
    const int j = static_cast<int>(idx / static_cast<std::size_t>(n));
    bool edge = i == 0 || i == n - 1;
    if (u.grid.dim == 2) edge = edge || j == 0 || j == n - 1;
    if (edge) ring += a;
  }
  return all > 0.0 ? ring / all : 0.0;
}

std::vector<kernels::SymTensor> sample_tensors(const Grid& grid, const MatrixFieldFn& d) {
  if (d.dim != grid.dim) throw DimensionMismatch("sample_tensors: tensor and grid dimensions differ");
  std::vector<kernels::SymTensor> out(grid.size());
  detail::parallel_for(out.size(), [&](std::size_t i) { out[i] = to_sym(d(grid.node(i))); });
  return out;
}

std::vector<kernels::SymTensor> to_tensors(const std::vector<Mat>& m) {
  std::vector<kernels::SymTensor> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = to_sym(m[i]);
  return out;
}

std::vector<double> apply_diffusion(const Grid& grid, const std::vector<kernels::SymTensor>& d,
                                    const std::vector<double>& u) {
  if (d.size() != grid.size() || u.size() != grid.size()) throw DimensionMismatch("apply_diffusion: sizes differ");
  std::vector<double> out(u.size());
  k::diffusion_apply(grid.stencil(), d, u, out);
  return out;
}

double diffusion_energy(const Grid& grid, const std::vector<kernels::SymTensor>& d, const std::vector<double>& u) {
  if (d.size() != grid.size() || u.size() != grid.size()) throw DimensionMismatch("diffusion_energy: sizes differ");
  return k::diffusion_form(grid.stencil(), d, u, u);
}

SolveResult solve_stiff(const VectorFieldSpec& field, const MatrixFieldFn& d, double eps, const GridFunction& u_in,
                        const SolverOptions& opts) {
  validate_options(opts);
  check_function(u_in, "solve_stiff");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidParameter("solve_stiff: eps must be positive");
  const Grid& grid = u_in.grid;
  if (field.dim != grid.dim || d.dim != grid.dim) throw DimensionMismatch("solve_stiff: dimensions differ");

  const kernels::StencilGrid sg = grid.stencil();
  const auto dt_tensors = sample_tensors(grid, d);
  std::vector<kernels::Velocity> b(grid.size());
  double bmax = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Vec v = field.eval(grid.node(i));
    b[i] = {v(0), grid.dim == 2 ? v(1) : 0.0};
    bmax = std::max(bmax, v.norm());
  }

  const double dt = effective_dt(opts);
  if (opts.theta < 0.5 && bmax > 0.0) {
    const double limit = opts.stability_knob * eps * grid.spacing() / bmax;
    if (dt > limit) {
      std::ostringstream os;
      os << "solve_stiff: explicit transport (theta = " << opts.theta << ") needs dt <= " << limit << ", got " << dt;
      throw ConfigurationError(os.str());
    }
  }

  const double inv_eps = 1.0 / eps;
  // M u = A u + (1/eps) T u
  auto apply_m = [&, inv_eps](std::span<const double> x, std::span<double> y) {
    std::vector<double> t(x.size());
    k::diffusion_apply(sg, dt_tensors, x, y);
    k::transport_apply(sg, b, x, t, opts.transport_order);
    k::axpby(inv_eps, t, 1.0, y);
  };

  StepFn step = [&](double, const std::vector<double>& u0, std::vector<double>& u1) -> int {
    const std::size_t n = u0.size();
    std::vector<double> rhs(n);
    apply_m(u0, rhs);
    k::axpby(1.0, u0, -(1.0 - opts.theta) * dt, rhs);
    if (opts.theta == 0.0) {
      u1 = rhs;
      return 0;
    }
    const double c = opts.theta * dt;
    LinearOperator op = [&](std::span<const double> x, std::span<double> y) {
      apply_m(x, y);
      k::axpby(1.0, x, c, y);
    };
    u1 = u0;
    return gmres(op, rhs, u1, opts.krylov_tol, opts.gmres_restart, opts.krylov_max_iter).iterations;
  };
  FormFn form = [&](const std::vector<double>& m) { return k::diffusion_form(sg, dt_tensors, m, m); };
  return time_loop(u_in, opts, "stiff", step, form, dt);
}

SolveResult solve_filtered(const VectorFieldSpec& field, const MatrixFieldFn& d, double eps,
                           const GridFunction& u_in, const SolverOptions& opts, const FlowIntegratorConfig& cfg) {
  validate_options(opts);
  check_function(u_in, "solve_filtered");
  if (!(eps > 0.0)) throw InvalidParameter("solve_filtered: eps must be positive");
  const Grid& grid = u_in.grid;
  if (field.dim != grid.dim || d.dim != grid.dim) throw DimensionMismatch("solve_filtered: dimensions differ");
  validate_config(cfg, field);

  const kernels::StencilGrid sg = grid.stencil();
  const double dt = effective_dt(opts);
  std::vector<kernels::SymTensor> tensors;
  StepFn step = [&](double t_mid, const std::vector<double>& u0, std::vector<double>& u1) -> int {
    tensors = sample_tensors(grid, group_apply(t_mid / eps, d, field, cfg));
    return diffusion_step(sg, tensors, dt, opts, u0, u1);
  };
  FormFn form = [&](const std::vector<double>& m) { return k::diffusion_form(sg, tensors, m, m); };
  return time_loop(u_in, opts, "filtered", step, form, dt);
}

SolveResult solve_static(const MatrixFieldFn& d, const GridFunction& u_in, const SolverOptions& opts,
                         std::string method) {
  validate_options(opts);
  check_function(u_in, "solve_static");
  const Grid& grid = u_in.grid;
  if (d.dim != grid.dim) throw DimensionMismatch("solve: tensor and grid dimensions differ");
  const kernels::StencilGrid sg = grid.stencil();
  const double dt = effective_dt(opts);
  const auto tensors = sample_tensors(grid, d);
  StepFn step = [&](double, const std::vector<double>& u0, std::vector<double>& u1) -> int {
    return diffusion_step(sg, tensors, dt, opts, u0, u1);
  };
  FormFn form = [&](const std::vector<double>& m) { return k::diffusion_form(sg, tensors, m, m); };
  return time_loop(u_in, opts, std::move(method), step, form, dt);
}

SolveResult solve_limit(const AverageResult& avg, const GridFunction& u_in, const SolverOptions& opts) {
  return solve_static(avg.average, u_in, opts, "limit");
}

namespace {

// Lattice value with periodic wrap or zero ghosts.
double lattice_value(const GridFunction& u, int i, int j) {
  const int n = u.grid.n;
  if (u.grid.boundary == Boundary::periodic) {
    i = ((i % n) + n) % n;
    j = ((j % n) + n) % n;
  } else if (i < 0 || i >= n || j < 0 || j >= n) {
    return 0.0;
  }
  return u.values[static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * static_cast<std::size_t>(j)];
}

// Interpolation weights along one axis: first index and 2 or 4 weights.
struct AxisStencil {
  int first = 0;
  int count = 2;
  double w[4] = {0, 0, 0, 0};
};

AxisStencil axis_stencil(double x, const Grid& g, Interpolation kind) {
  const double u = (x + g.half_width) / g.spacing() - 0.5;
  const double fl = std::floor(u);
  const double t = u - fl;
  AxisStencil s;
  if (kind == Interpolation::bilinear) {
    s.first = static_cast<int>(fl);
    s.count = 2;
    s.w[0] = 1.0 - t;
    s.w[1] = t;
    return s;
  }
  // 4-point Lagrange on nodes -1, 0, 1, 2 relative to floor(u).
  s.first = static_cast<int>(fl) - 1;
  s.count = 4;
  s.w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
  s.w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
  s.w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
  s.w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
  return s;
}

}  // namespace

double interpolate(const GridFunction& u, const Vec& y, Interpolation kind) {
  const Grid& g = u.grid;
  if (y.size() != g.dim) throw DimensionMismatch("interpolate: point dimension differs from grid");
  const AxisStencil sx = axis_stencil(y(0), g, kind);
  if (g.dim == 1) {
    double acc = 0.0;
    for (int a = 0; a < sx.count; ++a) acc += sx.w[a] * lattice_value(u, sx.first + a, 0);
    return acc;
  }
  const AxisStencil sy = axis_stencil(y(1), g, kind);
  double acc = 0.0;
  for (int b = 0; b < sy.count; ++b) {
    double row = 0.0;
    for (int a = 0; a < sx.count; ++a) row += sx.w[a] * lattice_value(u, sx.first + a, sy.first + b);
    acc += sy.w[b] * row;
  }
  return acc;
}

GridFunction pull_back(const GridFunction& state, const VectorFieldSpec& field, const FlowIntegratorConfig& cfg,
                       double s, Interpolation kind) {
  check_function(state, "pull_back");
  const Grid& g = state.grid;
  if (field.dim != g.dim) throw DimensionMismatch("pull_back: field and grid dimensions differ");
  validate_config(cfg, field);
  if (s == 0.0) return state;

  GridFunction out{g, std::vector<double>(g.size())};
  std::vector<char> outside(g.size(), 0);
  const double L = g.half_width;
  detail::parallel_for(out.values.size(), [&](std::size_t i) {
    Vec y = flow_map(field, cfg, s, g.node(i)).position;
    if (g.boundary == Boundary::periodic) {
      for (int d = 0; d < g.dim; ++d) y(d) -= 2.0 * L * std::floor((y(d) + L) / (2.0 * L));
    } else {
      for (int d = 0; d < g.dim; ++d) {
        if (std::abs(y(d)) > L) outside[i] = 1;
      }
    }
    out.values[i] = outside[i] ? 0.0 : interpolate(state, y, kind);
  });
  if (std::find(outside.begin(), outside.end(), 1) != outside.end()) {
    const double frac = boundary_mass_fraction(state);
    if (frac > 1e-6) {
      std::ostringstream os;
      os << "pull_back: characteristics leave the Dirichlet box while the boundary mass fraction is " << frac;
      throw OutOfDomain(os.str());
    }
  }
  return out;
}

}  // namespace stiffavg
