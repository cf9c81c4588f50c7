#include "stiffavg/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "parallel.hpp"
#include "stiffavg/errors.hpp"

namespace stiffavg {

namespace {

constexpr double kSymTol = 1e-9;
constexpr double kPosTol = 1e-9;
constexpr double kCoerTol = 1e-6;
constexpr double kNormSlack = 1e-8;

double require_period(const VectorFieldSpec& field, const char* where) {
  if (!field.period || !(*field.period > 0.0)) {
    std::ostringstream os;
    os << where << ": field '" << field.name << "' declares no period";
    throw ConfigurationError(os.str());
  }
  return *field.period;
}

// (1/N) sum_k weight_k G(s_k)A(z) along the orbit of z.
Mat orbit_sum(const MatrixFieldFn& a, const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, const Vec& z,
              double start, double spacing, int count, const std::vector<double>& weights) {
  Mat acc = Mat::Zero(a.dim, a.dim);
  int k = 0;
  sweep_orbit(field, cfg, z, start, spacing, count, [&](const OrbitPoint& pt) {
    acc += weights[static_cast<std::size_t>(k++)] * push_forward(a(pt.position), pt.jacobian_inv);
  });
  return acc;
}

}  // namespace

AverageResult ergodic_average(const MatrixFieldFn& a, const VectorFieldSpec& field, const FlowIntegratorConfig& cfg,
                              const AverageOptions& opts) {
  if (a.dim != field.dim) throw DimensionMismatch("ergodic_average: field and matrix dimensions differ");
  if (opts.s_nodes < 16) throw InvalidParameter("ergodic_average: s_nodes must be >= 16");
  validate_config(cfg, field);

  AverageResult res;
  res.mode = opts.mode;
  res.quadrature_nodes_in_s = opts.s_nodes;
  res.average.dim = a.dim;
  res.average.symmetric = a.symmetric;

  if (opts.mode == AverageMode::one_period) {
    const double period = require_period(field, "ergodic_average(one_period)");
    const int n = opts.s_nodes;
    const double r = opts.base_point;
    const std::vector<double> w(static_cast<std::size_t>(n), 1.0 / n);
    res.average.eval = [a, field, cfg, period, n, r, w](const Vec& z) {
      return orbit_sum(a, field, cfg, z, r, period / n, n, w);
    };
    return res;
  }

  if (!opts.cesaro_horizon || !(*opts.cesaro_horizon > 0.0)) {
    throw ConfigurationError("ergodic_average(cesaro): a positive cesaro_horizon is required");
  }
  const double horizon = *opts.cesaro_horizon;
  const int intervals = opts.s_nodes;
  std::vector<double> w(static_cast<std::size_t>(intervals) + 1, 1.0 / intervals);
  w.front() *= 0.5;
  w.back() *= 0.5;
  res.cesaro_horizon = horizon;
  res.average.eval = [a, field, cfg, horizon, intervals, w](const Vec& z) {
    return orbit_sum(a, field, cfg, z, 0.0, horizon / intervals, intervals + 1, w);
  };
  return res;
}

MatrixFieldFn lattice_interpolant(int dim, double half_width, int nodes_per_axis, std::vector<Mat> values,
                                  bool symmetric) {
  if (dim < 1 || dim > 2) throw InvalidParameter("lattice_interpolant: m must be 1 or 2");
  const std::size_t expected =
      dim == 1 ? static_cast<std::size_t>(nodes_per_axis)
               : static_cast<std::size_t>(nodes_per_axis) * static_cast<std::size_t>(nodes_per_axis);
  if (values.size() != expected) throw DimensionMismatch("lattice_interpolant: wrong number of node values");
  const int mdim = static_cast<int>(values.front().rows());
  const double h = 2.0 * half_width / nodes_per_axis;
  const int n = nodes_per_axis;
  auto data = std::make_shared<const std::vector<Mat>>(std::move(values));

  // Fractional lattice coordinate, clamped so extrapolation is constant.
  auto locate = [half_width, h, n](double x, int& i0, double& t) {
    double u = (x + half_width) / h - 0.5;
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
    i0 = std::min(static_cast<int>(std::floor(u)), n - 2);
    t = u - i0;
  };

  MatrixFieldFn f;
  f.dim = mdim;
  f.symmetric = symmetric;
  f.eval = [data, dim, n, locate](const Vec& y) -> Mat {
    const auto& v = *data;
    int i0 = 0;
    double tx = 0.0;
    locate(y(0), i0, tx);
    if (dim == 1) return (1.0 - tx) * v[static_cast<std::size_t>(i0)] + tx * v[static_cast<std::size_t>(i0 + 1)];
    int j0 = 0;
    double ty = 0.0;
    locate(y(1), j0, ty);
    auto at = [&](int i, int j) -> const Mat& { return v[static_cast<std::size_t>(i + n * j)]; };
    return (1.0 - tx) * (1.0 - ty) * at(i0, j0) + tx * (1.0 - ty) * at(i0 + 1, j0) +
           (1.0 - tx) * ty * at(i0, j0 + 1) + tx * ty * at(i0 + 1, j0 + 1);
  };
  return f;
}

MatrixFieldFn materialize_field(const MatrixFieldFn& a, double half_width, int nodes_per_axis) {
  if (a.dim > 2) throw UnsupportedMode("materialize: lattices are only built for m <= 2");
  if (nodes_per_axis < 2) throw InvalidParameter("materialize: at least 2 nodes per axis are required");
  const std::vector<Vec> nodes = sample_points(a.dim, half_width, nodes_per_axis, 0, 0);
  return lattice_interpolant(a.dim, half_width, nodes_per_axis, sample_nodes(a, nodes), a.symmetric);
}

AverageResult materialize(const AverageResult& avg, double half_width, int nodes_per_axis) {
  AverageResult out = avg;
  out.average = materialize_field(avg.average, half_width, nodes_per_axis);
  out.materialized = true;
  return out;
}

bool AveragePropertiesReport::all_passed() const {
  for (const PropertyCheck* c : {&symmetry, &positivity, &coercivity, &hq_contraction, &hq_inf_contraction}) {
    if (c->applicable && !c->passed) return false;
  }
  return true;
}

AveragePropertiesReport average_properties_check(const MatrixFieldFn& a, const AverageResult& avg,
                                                 const WeightedQuadrature& quad, double alpha) {
  AveragePropertiesReport rep;
  const std::vector<Mat> roots = weight_sqrt_at_nodes(quad);
  const std::vector<Mat> in = sample_nodes(a, quad.nodes);
  const std::vector<Mat> out = sample_nodes(avg.average, quad.nodes);

  double max_asym = 0.0;
  double min_eig_in = INFINITY, min_eig_out = INFINITY;
  double min_coer_in = INFINITY, min_coer_out = INFINITY;
  double hq_in = 0.0, hq_out = 0.0, inf_in = 0.0, inf_out = 0.0;
  for (std::size_t k = 0; k < quad.nodes.size(); ++k) {
    max_asym = std::max(max_asym, asymmetry(out[k]));
    min_eig_in = std::min(min_eig_in, min_eigenvalue(in[k]));
    min_eig_out = std::min(min_eig_out, min_eigenvalue(out[k]));
    const Mat win = roots[k] * in[k] * roots[k];
    const Mat wout = roots[k] * out[k] * roots[k];
    min_coer_in = std::min(min_coer_in, min_eigenvalue(win));
    min_coer_out = std::min(min_coer_out, min_eigenvalue(wout));
    hq_in += quad.weights[k] * win.squaredNorm();
    hq_out += quad.weights[k] * wout.squaredNorm();
    inf_in = std::max(inf_in, win.norm());
    inf_out = std::max(inf_out, wout.norm());
  }

  rep.symmetry.applicable = a.symmetric;
  rep.symmetry.margin = kSymTol - max_asym;
  rep.symmetry.passed = max_asym <= kSymTol;

  rep.positivity.applicable = min_eig_in >= -kPosTol;
  rep.positivity.margin = min_eig_out;
  rep.positivity.passed = rep.positivity.applicable && min_eig_out >= -kPosTol;

  rep.coercivity.applicable = min_coer_in >= alpha - kCoerTol;
  rep.coercivity.margin = min_coer_out - alpha;
  rep.coercivity.passed = rep.coercivity.applicable && min_coer_out >= alpha - kCoerTol;

  rep.hq_input = std::sqrt(hq_in);
  rep.hq_average = std::sqrt(hq_out);
  rep.hq_contraction.margin = rep.hq_input - rep.hq_average;
  rep.hq_contraction.passed = rep.hq_average <= rep.hq_input + kNormSlack;

  rep.hq_inf_input = inf_in;
  rep.hq_inf_average = inf_out;
  rep.hq_inf_contraction.margin = inf_in - inf_out;
  rep.hq_inf_contraction.passed = inf_out <= inf_in + kNormSlack;
  return rep;
}

CorrectorResult corrector_solve(const MatrixFieldFn& d, const AverageResult& avg, const VectorFieldSpec& field,
                                const FlowIntegratorConfig& cfg, const WeightedQuadrature& quad,
                                const CorrectorOptions& opts) {
  if (!field.period) throw UnsupportedMode("corrector_solve: correctors are only built for periodic flows");
  if (d.dim != field.dim || avg.average.dim != field.dim) {
    throw DimensionMismatch("corrector_solve: dimensions disagree");
  }
  if (opts.s_nodes < 16) throw InvalidParameter("corrector_solve: s_nodes must be >= 16");
  validate_config(cfg, field);

  const double period = *field.period;
  const int n = opts.s_nodes;
  const double omega = 2.0 * std::numbers::pi / period;
  const int modes = n % 2 == 0 ? n / 2 - 1 : (n - 1) / 2;

  // Trigonometric interpolant of the sawtooth s - T/2 on [0, T), divided by N.
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  double wsum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double s = k * period / n;
    double acc = 0.0;
    for (int j = 1; j <= modes; ++j) acc -= 2.0 * std::sin(j * omega * s) / (j * omega);
    w[static_cast<std::size_t>(k)] = acc / n;
    wsum += acc / n;
  }

  // G(s)<D> = <D> along the orbit, so the <D> part of D - <D> only enters
  // through the (vanishing) total weight.
  MatrixFieldFn avg_field = avg.average;
  CorrectorResult res;
  res.corrector.dim = d.dim;
  res.corrector.symmetric = d.symmetric;
  res.corrector.eval = [d, field, cfg, period, n, w, wsum, avg_field](const Vec& z) -> Mat {
    const Mat oscill = orbit_sum(d, field, cfg, z, 0.0, period / n, n, w);
    return oscill - wsum * avg_field(z);
  };

  MatrixFieldFn target;
  target.dim = d.dim;
  target.eval = [d, avg_field](const Vec& z) -> Mat { return d(z) - avg_field(z); };
  const GeneratorResidual gr = generator_residual(target, res.corrector, field, cfg, opts.fd_step, quad);
  res.residual = gr.max_node;
  res.residual_l2 = gr.l2;

  // <C> on an evenly strided subset of the quadrature nodes.
  AverageOptions mean_opts;
  mean_opts.s_nodes = n;
  const AverageResult mean_c = ergodic_average(res.corrector, field, cfg, mean_opts);
  const std::size_t count = quad.nodes.size();
  const std::size_t checks = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, opts.mean_check_nodes)));
  std::vector<Vec> subset;
  for (std::size_t i = 0; i < checks; ++i) subset.push_back(quad.nodes[(i * count) / checks + (count / checks) / 2]);
  const std::vector<Mat> means = sample_nodes(mean_c.average, subset);
  for (const Mat& m : means) res.mean_norm = std::max(res.mean_norm, m.norm());
  return res;
}

}  // namespace stiffavg
