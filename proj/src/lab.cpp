#include "stiffavg/lab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "parallel.hpp"
#include "stiffavg/errors.hpp"

namespace stiffavg {

RateFit rate_fit(const std::vector<double>& eps, const std::vector<double>& errors) {
  if (eps.size() != errors.size()) throw DimensionMismatch("rate_fit: ladder and error counts differ");
  if (eps.size() < 3) throw InvalidParameter("rate_fit: at least 3 points are required");
  const std::size_t n = eps.size();
  double sx = 0.0, sy = 0.0;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(eps[i] > 0.0) || !(errors[i] > 0.0) || !std::isfinite(errors[i])) {
      std::ostringstream os;
      os << "rate_fit: point " << i << " has eps = " << eps[i] << ", error = " << errors[i]
         << "; both must be positive";
      throw DegenerateFit(os.str());
    }
    x[i] = std::log(eps[i]);
    y[i] = std::log(errors[i]);
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw DegenerateFit("rate_fit: all eps values coincide");
  RateFit f;
  f.rate = sxy / sxx;
  f.intercept = my - f.rate * mx;
  return f;
}

GridFunction state_at(const SolveResult& states, double t) {
  const auto& ts = states.times;
  if (ts.empty()) throw InvalidParameter("state_at: no stored states");
  const double slack = 1e-12 * std::max(1.0, std::abs(ts.back()));
  if (t < ts.front() - slack || t > ts.back() + slack) {
    std::ostringstream os;
    os << "state_at: t = " << t << " lies outside [" << ts.front() << ", " << ts.back() << "]";
    throw OutOfDomain(os.str());
  }
  auto it = std::lower_bound(ts.begin(), ts.end(), t - slack);
  std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  if (hi >= ts.size()) hi = ts.size() - 1;
  if (std::abs(ts[hi] - t) <= slack || hi == 0) return states.states[hi];
  const std::size_t lo = hi - 1;
  const double a = (t - ts[lo]) / (ts[hi] - ts[lo]);
  GridFunction out = states.states[lo];
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (1.0 - a) * states.states[lo].values[i] + a * states.states[hi].values[i];
  }
  return out;
}

GridFunction corrector_filtered(const MatrixFieldFn& c, const GridFunction& v, const VectorFieldSpec& field,
                                const FlowIntegratorConfig& cfg, double s) {
  const Grid& g = v.grid;
  if (c.dim != g.dim || field.dim != g.dim) throw DimensionMismatch("corrector_filtered: dimensions differ");
  GridFunction out{g, std::vector<double>(g.size(), 0.0)};
  if (s == 0.0) return out;
  // -A_D v discretises div(D grad v).
  const auto a_c = apply_diffusion(g, sample_tensors(g, c), v.values);
  const auto a_gc = apply_diffusion(g, sample_tensors(g, group_apply(s, c, field, cfg)), v.values);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = a_c[i] - a_gc[i];
  return out;
}

GridFunction corrector_evaluate(const MatrixFieldFn& c, const SolveResult& v_states, const VectorFieldSpec& field,
                                const FlowIntegratorConfig& cfg, double t, double s, Interpolation kind) {
  const GridFunction v = state_at(v_states, t);
  const GridFunction w = corrector_filtered(c, v, field, cfg, s);
  return pull_back(w, field, cfg, -s, kind);
}

ConvergenceReport convergence_study(const ConvergenceSetup& setup) {
  const auto& ladder = setup.eps_ladder;
  if (ladder.size() < 3) throw InvalidParameter("convergence_study: the eps ladder needs at least 3 entries");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0)) throw InvalidParameter("convergence_study: eps values must be positive");
    if (i > 0 && !(ladder[i] < ladder[i - 1])) {
      throw InvalidParameter("convergence_study: the eps ladder must be strictly decreasing");
    }
  }
  if (setup.use_corrector && !setup.corrector) {
    throw ConfigurationError("convergence_study: use_corrector needs a corrector field");
  }
  const Grid& grid = setup.u_in.grid;

  SolverOptions limit_opts;
  limit_opts.t_end = setup.t_end;
  limit_opts.dt = setup.limit_dt;
  limit_opts.snapshots = setup.snapshots;
  const SolveResult limit = solve_limit(setup.average, setup.u_in, limit_opts);
  const auto p_tensors = sample_tensors(grid, setup.p_weight);

  ConvergenceReport rep;
  rep.eps_ladder = ladder;
  rep.with_corrector = setup.use_corrector;
  for (const auto& w : limit.warnings) rep.warnings.push_back(w);

  for (double eps : ladder) {
    SolverOptions opts;
    opts.t_end = setup.t_end;
    opts.dt = setup.stiff_dt ? setup.stiff_dt(eps) : default_stiff_dt(eps);
    opts.snapshots = setup.snapshots;
    opts.transport_order = setup.transport_order;
    SolveResult stiff;
    try {
      stiff = solve_stiff(setup.field, setup.d, eps, setup.u_in, opts);
    } catch (const SolverError& e) {
      std::ostringstream os;
      os << "convergence_study: eps = " << eps << ": " << e.what();
      throw SolverError(os.str(), e.iterations());
    }
    for (const auto& w : stiff.warnings) rep.warnings.push_back("eps = " + std::to_string(eps) + ": " + w);

    double sup = 0.0, sup_lab = 0.0, sup_corr = 0.0, grad_int = 0.0;
    const double dt_snap = setup.t_end / setup.snapshots;
    for (std::size_t kk = 0; kk < stiff.times.size(); ++kk) {
      const double s = stiff.times[kk] / eps;
      const GridFunction& v = limit.states[kk];
      const GridFunction ve = pull_back(stiff.states[kk], setup.field, setup.cfg, s, setup.interpolation);
      sup = std::max(sup, l2_distance(ve, v));
      const GridFunction vl = pull_back(v, setup.field, setup.cfg, -s, setup.interpolation);
      sup_lab = std::max(sup_lab, l2_distance(stiff.states[kk], vl));

      std::vector<double> diff(ve.values.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = ve.values[i] - v.values[i];
      const double weight = (kk == 0 || kk + 1 == stiff.times.size()) ? 0.5 : 1.0;
      grad_int += weight * dt_snap * diffusion_energy(grid, p_tensors, diff);

      if (setup.use_corrector) {
        const GridFunction w = corrector_filtered(*setup.corrector, v, setup.field, setup.cfg, s);
        GridFunction corrected = v;
        for (std::size_t i = 0; i < corrected.values.size(); ++i) corrected.values[i] += eps * w.values[i];
        sup_corr = std::max(sup_corr, l2_distance(ve, corrected));
      }
    }
    rep.errors_linf_l2.push_back(sup);
    rep.errors_lab.push_back(sup_lab);
    rep.errors_grad_xp.push_back(std::sqrt(grad_int));
    if (setup.use_corrector) rep.errors_corrected.push_back(sup_corr);
  }

  const std::size_t tail = std::min<std::size_t>(ladder.size(), static_cast<std::size_t>(std::max(3, setup.tail)));
  auto last = [tail](const std::vector<double>& v) { return std::vector<double>(v.end() - static_cast<long>(tail), v.end()); };
  rep.fit = rate_fit(last(ladder), last(rep.errors_linf_l2));
  rep.grad_fit = rate_fit(last(ladder), last(rep.errors_grad_xp));
  rep.monotone = true;
  for (std::size_t i = 1; i < rep.errors_linf_l2.size(); ++i) {
    if (!(rep.errors_linf_l2[i] < rep.errors_linf_l2[i - 1])) rep.monotone = false;
  }
  rep.corrector_gain = setup.use_corrector && rep.errors_corrected.back() <= rep.errors_linf_l2.back();
  rep.pass = rep.monotone && rep.fit.rate >= setup.rate_target && rep.grad_fit.rate >= setup.rate_target &&
             (!setup.use_corrector || rep.corrector_gain);
  return rep;
}

namespace {

void check_sampled(const TimeSampledField& f, const Grid& grid, int dim, const char* name) {
  if (f.times.size() < 2 || f.values.size() != f.times.size()) {
    throw DimensionMismatch(std::string("two_scale_pairing: ") + name + " needs >= 2 time samples with values");
  }
  if (f.times.front() != 0.0) throw DimensionMismatch(std::string("two_scale_pairing: ") + name + " must start at t = 0");
  for (std::size_t i = 0; i < f.times.size(); ++i) {
    if (i > 0 && !(f.times[i] > f.times[i - 1])) {
      throw DimensionMismatch(std::string("two_scale_pairing: ") + name + " times must increase");
    }
    if (f.values[i].size() != grid.size()) {
      throw DimensionMismatch(std::string("two_scale_pairing: ") + name + " is not sampled on the grid nodes");
    }
    for (const Vec& v : f.values[i]) {
      if (v.size() != dim) throw DimensionMismatch(std::string("two_scale_pairing: ") + name + " has the wrong dimension");
    }
  }
}

// Linear interpolation of a sampled field in time.
Vec sampled_at(const TimeSampledField& f, std::size_t node, double t) {
  const auto& ts = f.times;
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  if (hi == 0) return f.values.front()[node];
  if (hi >= ts.size()) return f.values.back()[node];
  const std::size_t lo = hi - 1;
  const double a = (t - ts[lo]) / (ts[hi] - ts[lo]);
  return (1.0 - a) * f.values[lo][node] + a * f.values[hi][node];
}

double spatial_pairing(const TimeSampledField& theta, const TimeSampledField& w, const std::vector<Mat>& tensors,
                       double t, double vol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    acc += sampled_at(theta, i, t).dot(tensors[i] * sampled_at(w, i, t));
  }
  return vol * acc;
}

}  // namespace

PairingReport two_scale_pairing(const TimeSampledField& theta, const TimeSampledField& w, const Grid& grid,
                                const MatrixFieldFn& d, const AverageResult& avg, const VectorFieldSpec& field,
                                const FlowIntegratorConfig& cfg, const std::vector<double>& eps_ladder,
                                const PairingOptions& opts) {
  const int dim = grid.dim;
  if (d.dim != dim || field.dim != dim || avg.average.dim != dim) {
    throw DimensionMismatch("two_scale_pairing: dimensions differ");
  }
  check_sampled(theta, grid, dim, "theta");
  check_sampled(w, grid, dim, "w");
  if (theta.times != w.times) throw DimensionMismatch("two_scale_pairing: theta and w use different time lattices");
  if (eps_ladder.empty()) throw InvalidParameter("two_scale_pairing: empty eps ladder");
  if (opts.samples_per_period < 8) throw InvalidParameter("two_scale_pairing: samples_per_period must be >= 8");
  validate_config(cfg, field);

  const double t_end = theta.times.back();
  const double vol = grid.cell_volume();
  const std::vector<Vec> nodes = grid.nodes();

  PairingReport rep;
  rep.eps_ladder = eps_ladder;
  const std::vector<Mat> avg_nodes = sample_nodes(avg.average, nodes);
  // Trapezoid on the lattice, non-uniform spacing allowed.
  double limit = 0.0;
  for (std::size_t k = 0; k + 1 < theta.times.size(); ++k) {
    const double t0 = theta.times[k], t1 = theta.times[k + 1];
    limit += 0.5 * (t1 - t0) *
             (spatial_pairing(theta, w, avg_nodes, t0, vol) + spatial_pairing(theta, w, avg_nodes, t1, vol));
  }
  rep.limit_value = limit;

  const double fast_period = field.period ? *field.period : 2.0 * std::numbers::pi;
  for (double eps : eps_ladder) {
    if (!(eps > 0.0)) throw InvalidParameter("two_scale_pairing: eps values must be positive");
    const double periods = t_end / (eps * fast_period);
    const int intervals = std::max(static_cast<int>(theta.times.size()) - 1,
                                   static_cast<int>(std::ceil(periods * opts.samples_per_period)));
    const double dt = t_end / intervals;
    double value = 0.0;
    for (int j = 0; j <= intervals; ++j) {
      const double t = j * dt;
      const std::vector<Mat> g = sample_nodes(group_apply(t / eps, d, field, cfg), nodes);
      const double weight = (j == 0 || j == intervals) ? 0.5 : 1.0;
      value += weight * dt * spatial_pairing(theta, w, g, t, vol);
    }
    rep.pairing_values.push_back(value);
    rep.deviations.push_back(std::abs(value - limit));
  }
  return rep;
}

}  // namespace stiffavg
