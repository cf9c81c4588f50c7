#include "stiffavg/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "stiffavg/lab.hpp"

namespace stiffavg::acceptance {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(4) << x;
  return os.str();
}

class Recorder {
 public:
  explicit Recorder(CriterionResult& r) : r_(r) { r_.passed = true; }

  // Records "label = value <= limit" and fails the criterion when violated.
  void at_most(const std::string& label, double value, double limit) {
    add(label + " = " + fmt(value) + " <= " + fmt(limit), value <= limit);
  }
  void at_least(const std::string& label, double value, double limit) {
    add(label + " = " + fmt(value) + " >= " + fmt(limit), value >= limit);
  }
  void holds(const std::string& label, bool ok) { add(label, ok); }

 private:
  void add(const std::string& text, bool ok) {
    r_.details.push_back((ok ? "ok   " : "FAIL ") + text);
    if (!ok) r_.passed = false;
  }
  CriterionResult& r_;
};

FlowIntegratorConfig rk4(double step) {
  FlowIntegratorConfig cfg;
  cfg.method = FlowMethod::rk4;
  cfg.step = step;
  return cfg;
}

FlowIntegratorConfig analytic() {
  FlowIntegratorConfig cfg;
  cfg.method = FlowMethod::analytic;
  return cfg;
}

Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

double max_abs_diff(const std::vector<Mat>& a, const std::vector<Mat>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return m;
}

// Random symmetric 2x2 coefficient with entries in [-1, 1].
Mat random_sym(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat s(2, 2);
  s(0, 0) = u(rng);
  s(1, 1) = u(rng);
  s(0, 1) = s(1, 0) = u(rng);
  return s;
}

// Quadratic symmetric polynomial times exp(-(beta y1^2 + gamma y2^2)/2), an
// envelope that the rotation flow preserves.
MatrixFieldFn decaying_polynomial_field(double beta, double gamma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Mat> c;
  for (int i = 0; i < 6; ++i) c.push_back(random_sym(rng));
  MatrixFieldFn f;
  f.dim = 2;
  f.symmetric = true;
  f.eval = [c, beta, gamma](const Vec& y) -> Mat {
    const double x1 = y(0), x2 = y(1);
    const Mat poly = c[0] + x1 * c[1] + x2 * c[2] + x1 * x1 * c[3] + x1 * x2 * c[4] + x2 * x2 * c[5];
    return std::exp(-0.5 * (beta * x1 * x1 + gamma * x2 * x2)) * poly;
  };
  return f;
}

// M(y) M(y)^T + alpha P with M linear in y: symmetric, PSD, and
// Q^{1/2} A Q^{1/2} >= alpha I.
MatrixFieldFn coercive_polynomial_field(const Mat& p, double alpha, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Mat> c(3, Mat::Zero(2, 2));
  for (auto& m : c) {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) m(i, j) = u(rng);
  }
  MatrixFieldFn f;
  f.dim = 2;
  f.symmetric = true;
  f.eval = [c, p, alpha](const Vec& y) -> Mat {
    const Mat m = c[0] + y(0) * c[1] + y(1) * c[2];
    return m * m.transpose() + alpha * p;
  };
  return f;
}

GridFunction gaussian(const Grid& g, double cx, double cy, double sigma) {
  return sample_function(g, [=](const Vec& y) {
    const double dx = y(0) - cx, dy = g.dim == 2 ? y(1) - cy : 0.0;
    return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
  });
}

// Measured exponential decay rate of ||u|| between the first and last output.
double decay_rate(const SolveResult& r) {
  const double t = r.times.back() - r.times.front();
  return -std::log(l2_norm(r.states.back()) / l2_norm(r.states.front())) / t;
}

// ---------------------------------------------------------------- criteria

void rotation_average_oracle(Recorder& rec) {
  const VectorFieldSpec f = rotation_field(1.0, 4.0);
  const AverageResult avg = ergodic_average(identity_matrix_field(2), f, FlowIntegratorConfig{});
  const std::vector<Vec> nodes = sample_points(2, 4.0, 32, 0, 0);
  const std::vector<Mat> values = sample_nodes(avg.average, nodes);
  const std::vector<Mat> expected(values.size(), diag2(2.5, 0.625));
  rec.at_most("max |<I> - diag(2.5, 0.625)| over 1024 nodes (rk4, 256 s-nodes)", max_abs_diff(values, expected),
              1e-8);
}

Mat gyrokinetic_expected(double wc) {
  Mat e(2, 2);
  e << 0.0, 1.0, -1.0, 0.0;
  Mat m = Mat::Zero(6, 6);
  m.block(0, 0, 2, 2) = 2.0 / (wc * wc) * Mat::Identity(2, 2);
  m.block(0, 3, 2, 2) = -e / wc;
  m.block(3, 0, 2, 2) = e / wc;
  m.block(3, 3, 2, 2) = Mat::Identity(2, 2);
  m(5, 5) = 1.0;
  return m;
}

void gyrokinetic_oracle(Recorder& rec) {
  Mat d = Mat::Zero(6, 6);
  d(3, 3) = d(4, 4) = d(5, 5) = 1.0;
  const std::vector<Vec> points = sample_points(6, 2.0, 0, 20, 20261015);
  for (double wc : {1.0, 2.0}) {
    const VectorFieldSpec f = gyrokinetic_field(wc);
    const AverageResult avg = ergodic_average(constant_matrix_field(d), f, FlowIntegratorConfig{});
    const std::vector<Mat> values = sample_nodes(avg.average, points);
    const std::vector<Mat> expected(values.size(), gyrokinetic_expected(wc));
    rec.at_most("omega_c = " + fmt(wc) + ": max entry error at 20 points", max_abs_diff(values, expected), 1e-7);
  }
}

void group_property_suite(Recorder& rec) {
  const double beta = 1.0, gamma = 4.0, alpha = 0.3;
  const VectorFieldSpec f = rotation_field(beta, gamma);
  const FlowIntegratorConfig cfg = rk4(2e-3);
  const Mat p = rotation_invariant_weight(beta, gamma);
  const Mat q = p.inverse();
  const WeightedQuadrature quad =
      make_midpoint_quadrature(2, 6.0, 64, constant_matrix_field(p), constant_matrix_field(q));
  const std::vector<Mat> roots = weight_sqrt_at_nodes(quad);
  const MatrixFieldFn a = decaying_polynomial_field(beta, gamma, 11);
  const MatrixFieldFn ac = coercive_polynomial_field(p, alpha, 12);
  const double norm_a = hq_norm(a, quad);

  for (double s : {0.3, 1.0, 2.7}) {
    const std::string at = "s = " + fmt(s) + ": ";
    const MatrixFieldFn gs = group_apply(s, a, f, cfg);
    rec.at_most(at + "| |G(s)A|_Q / |A|_Q - 1 |", std::abs(hq_norm(gs, quad) / norm_a - 1.0), 1e-6);

    const double t = 0.5;
    const MatrixFieldFn composed = group_apply(s, group_apply(t, a, f, cfg), f, cfg);
    const MatrixFieldFn direct = group_apply(s + t, a, f, cfg);
    const std::vector<Mat> lhs = sample_nodes(composed, quad.nodes);
    const std::vector<Mat> rhs = sample_nodes(direct, quad.nodes);
    rec.at_most(at + "group law max |G(s)G(0.5)A - G(s+0.5)A|", max_abs_diff(lhs, rhs), 1e-6);

    const std::vector<Mat> gc = sample_nodes(group_apply(s, ac, f, cfg), quad.nodes);
    double asym = 0.0, min_eig = INFINITY, min_coer = INFINITY;
    for (std::size_t i = 0; i < gc.size(); ++i) {
      asym = std::max(asym, asymmetry(gc[i]));
      min_eig = std::min(min_eig, min_eigenvalue(gc[i]));
      min_coer = std::min(min_coer, min_eigenvalue(roots[i] * gc[i] * roots[i]));
    }
    rec.at_most(at + "asymmetry", asym, 1e-9);
    rec.at_least(at + "min eig G(s)A", min_eig, -1e-9);
    rec.at_least(at + "min eig Q^1/2 G(s)A Q^1/2", min_coer, alpha - 1e-6);
  }
}

void average_property_suite(Recorder& rec) {
  const double beta = 1.0, gamma = 4.0, alpha = 0.3;
  const VectorFieldSpec f = rotation_field(beta, gamma);
  const FlowIntegratorConfig cfg = rk4(2e-3);
  const Mat p = rotation_invariant_weight(beta, gamma);
  const WeightedQuadrature quad =
      make_midpoint_quadrature(2, 6.0, 64, constant_matrix_field(p), constant_matrix_field(p.inverse()));
  AverageOptions ao;
  ao.s_nodes = 64;

  const MatrixFieldFn ac = coercive_polynomial_field(p, alpha, 21);
  const AveragePropertiesReport pointwise = average_properties_check(ac, ergodic_average(ac, f, cfg, ao), quad, alpha);
  rec.holds("symmetry (margin " + fmt(pointwise.symmetry.margin) + ")", pointwise.symmetry.passed);
  rec.holds("positivity (min eig " + fmt(pointwise.positivity.margin) + ")", pointwise.positivity.passed);
  rec.holds("coercivity (margin " + fmt(pointwise.coercivity.margin) + ")", pointwise.coercivity.passed);

  const MatrixFieldFn a = decaying_polynomial_field(beta, gamma, 22);
  const AverageResult avg = ergodic_average(a, f, cfg, ao);
  const AveragePropertiesReport norms = average_properties_check(a, avg, quad, 0.0);
  rec.at_most("|<A>|_Q - |A|_Q", norms.hq_average - norms.hq_input, 1e-8);
  rec.at_most("|<A>|_HQinf - |A|_HQinf", norms.hq_inf_average - norms.hq_inf_input, 1e-8);

  std::vector<Vec> subset;
  for (std::size_t i = 0; i < quad.nodes.size(); i += 128) subset.push_back(quad.nodes[i]);
  const AverageResult twice = ergodic_average(avg.average, f, cfg, ao);
  rec.at_most("idempotence max |<<A>> - <A>| (32 nodes)",
              max_abs_diff(sample_nodes(twice.average, subset), sample_nodes(avg.average, subset)), 1e-6);

  AverageOptions shifted = ao;
  shifted.base_point = 0.37;
  const AverageResult avg_r = ergodic_average(a, f, cfg, shifted);
  rec.at_most("base point r = 0.37 vs 0: max difference",
              max_abs_diff(sample_nodes(avg_r.average, quad.nodes), sample_nodes(avg.average, quad.nodes)), 1e-8);
}

void corrector_closure(Recorder& rec) {
  const VectorFieldSpec f = rotation_field(1.0, 4.0);
  const FlowIntegratorConfig cfg = rk4(2e-3);
  const MatrixFieldFn d = identity_matrix_field(2);
  AverageOptions ao;
  ao.s_nodes = 64;
  const AverageResult avg = ergodic_average(d, f, cfg, ao);
  const WeightedQuadrature quad = make_midpoint_quadrature(2, 2.0, 16);
  CorrectorOptions co;
  co.s_nodes = 64;
  const CorrectorResult c = corrector_solve(d, avg, f, cfg, quad, co);
  rec.at_most("max node |D - <D> - L_fd(C)|", c.residual, 1e-4);
  rec.at_most("max |<C>| over 64 nodes", c.mean_norm, 1e-6);
}

void solver_energy_identities(Recorder& rec) {
  const double pi = std::numbers::pi;
  const VectorFieldSpec rot = rotation_field(1.0, 1.0);
  const FlowIntegratorConfig cfg = analytic();
  const MatrixFieldFn d = constant_matrix_field(diag2(2.5, 0.5));
  const Grid g = make_grid(2, pi, 128, Boundary::periodic);
  const GridFunction u0 = gaussian(g, 0.5, 0.0, 0.5);
  const double eps = 0.1;

  SolverOptions opts;
  opts.t_end = 0.25;
  opts.dt = default_stiff_dt(eps);
  AverageOptions ao;
  ao.s_nodes = 64;
  const AverageResult avg = materialize(ergodic_average(d, rot, cfg, ao), pi, 128);
  const SolveResult runs[] = {solve_stiff(rot, d, eps, u0, opts), solve_filtered(rot, d, eps, u0, opts, cfg),
                              solve_limit(avg, u0, opts)};
  for (const SolveResult& r : runs) {
    rec.at_most(r.method + ": max per-step L2 increase", r.max_l2_increase, 1e-10);
    rec.at_most(r.method + ": energy balance residual", r.max_energy_residual, 1e-8);
    rec.at_most(r.method + ": mass drift", r.max_mass_drift, 1e-10);
  }

  // Heat oracles: ||u(t)|| of a single Fourier mode decays like exp(-lambda t).
  SolverOptions heat;
  heat.t_end = 1.0;
  heat.dt = 1e-3;
  const double k2 = (pi / pi) * (pi / pi);
  {
    const Grid g1 = make_grid(1, pi, 128, Boundary::periodic);
    const GridFunction s1 = sample_function(g1, [](const Vec& y) { return std::sin(y(0)); });
    const SolveResult r = solve_stiff(constant_field(make_vec({0.0}), "zero"), identity_matrix_field(1), 1.0, s1, heat);
    rec.at_most("stiff, b = 0, 1-D: |rate / (pi/L)^2 - 1|", std::abs(decay_rate(r) / k2 - 1.0), 0.01);
  }
  const GridFunction mode = sample_function(g, [](const Vec& y) { return std::sin(y(0)); });
  {
    const SolveResult r = solve_filtered(rot, identity_matrix_field(2), eps, mode, heat, cfg);
    rec.at_most("filtered, D = I: |rate / (pi/L)^2 - 1|", std::abs(decay_rate(r) / k2 - 1.0), 0.01);
  }
  {
    const VectorFieldSpec rot14 = rotation_field(1.0, 4.0);
    const AverageResult avg14 = ergodic_average(identity_matrix_field(2), rot14, cfg, ao);
    const SolveResult r = solve_limit(avg14, mode, heat);
    rec.at_most("limit, <I> for beta=1, gamma=4: |rate / (2.5 (pi/L)^2) - 1|",
                std::abs(decay_rate(r) / (2.5 * k2) - 1.0), 0.01);
  }
}

// Shared setup of the convergence and equivalence experiments.
struct Experiment {
  VectorFieldSpec field = rotation_field(1.0, 1.0);
  FlowIntegratorConfig cfg = analytic();
  MatrixFieldFn d = constant_matrix_field(diag2(2.5, 0.5));
  Grid grid = make_grid(2, 16.0, 128, Boundary::homogeneous_dirichlet);
  GridFunction u_in = gaussian(grid, 0.5, 0.0, 3.0);
};

void convergence_experiment(Recorder& rec) {
  const Experiment ex;
  AverageOptions ao;
  ao.s_nodes = 64;
  const AverageResult avg = ergodic_average(ex.d, ex.field, ex.cfg, ao);
  CorrectorOptions co;
  co.s_nodes = 64;
  const CorrectorResult c =
      corrector_solve(ex.d, avg, ex.field, ex.cfg, make_midpoint_quadrature(2, 2.0, 8), co);

  ConvergenceSetup s;
  s.field = ex.field;
  s.cfg = ex.cfg;
  s.d = ex.d;
  s.average = materialize(avg, ex.grid.half_width, ex.grid.n);
  s.corrector = materialize_field(c.corrector, ex.grid.half_width, ex.grid.n);
  s.p_weight = identity_matrix_field(2);
  s.u_in = ex.u_in;
  s.t_end = 0.5;
  s.eps_ladder = {0.2, 0.1, 0.05, 0.025};
  s.use_corrector = true;
  s.interpolation = Interpolation::cubic;
  const ConvergenceReport r = convergence_study(s);

  std::ostringstream ladder;
  for (std::size_t i = 0; i < r.eps_ladder.size(); ++i) {
    ladder << (i ? ", " : "") << r.eps_ladder[i] << ": " << fmt(r.errors_linf_l2[i]) << "/"
           << fmt(r.errors_grad_xp[i]) << "/" << fmt(r.errors_corrected[i]);
  }
  rec.holds("errors (state/grad/corrected) " + ladder.str(), true);
  rec.holds("state errors strictly decreasing", r.monotone);
  rec.at_least("state error rate (last 3)", r.fit.rate, 0.9);
  rec.at_least("P-weighted gradient error rate (last 3)", r.grad_fit.rate, 0.9);
  rec.at_most("corrected - uncorrected error at eps = 0.025", r.errors_corrected.back() - r.errors_linf_l2.back(),
              0.0);
  rec.at_most("boundary mass warnings", static_cast<double>(r.warnings.size()), 0.0);
}

void pairing_experiment(Recorder& rec) {
  const VectorFieldSpec f = rotation_field(1.0, 1.0);
  const FlowIntegratorConfig cfg = analytic();
  const Mat dm = diag2(2.0, 0.0);
  const MatrixFieldFn d = constant_matrix_field(dm);
  const Grid g = make_grid(2, 4.0, 64, Boundary::periodic);
  const double t_end = 1.0;
  const double a = 1.0, b = 0.5;  // anisotropic Gaussian widths

  TimeSampledField theta;
  theta.times = {0.0, t_end};
  std::vector<Vec> grad(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec y = g.node(i);
    const double e = std::exp(-0.5 * (y(0) * y(0) / (a * a) + y(1) * y(1) / (b * b)));
    grad[i] = make_vec({-y(0) / (a * a) * e, -y(1) / (b * b) * e});
  }
  theta.values = {grad, grad};
  AverageOptions ao;
  ao.s_nodes = 64;
  const AverageResult avg = ergodic_average(d, f, cfg, ao);
  const PairingReport r = two_scale_pairing(theta, theta, g, d, avg, f, cfg, {0.2, 0.1, 0.05});

  // Oracle: dense Cesaro mean over s in [0, 4000] of <M, R(s) D R(s)^T>,
  // M = sum_nodes h^2 theta w^T, with the rotation written out by hand.
  Mat m = Mat::Zero(2, 2);
  for (const Vec& v : grad) m += g.cell_volume() * v * v.transpose();
  const double horizon = 4000.0;
  const long samples = 4'000'000;
  double acc = 0.0;
  for (long k = 0; k <= samples; ++k) {
    const double s = horizon * static_cast<double>(k) / samples;
    Mat rot(2, 2);
    rot << std::cos(s), -std::sin(s), std::sin(s), std::cos(s);
    const double w = (k == 0 || k == samples) ? 0.5 : 1.0;
    acc += w * frobenius_dot(m, rot * dm * rot.transpose());
  }
  const double oracle = t_end * acc / samples;

  rec.holds("deviations " + fmt(r.deviations[0]) + ", " + fmt(r.deviations[1]) + ", " + fmt(r.deviations[2]), true);
  rec.at_most("deviation(0.05) / deviation(0.2)", r.deviations[2] / r.deviations[0], 0.5);
  rec.at_most("|dense oracle - limit pairing|", std::abs(oracle - r.limit_value), 1e-3);
}

void filtered_stiff_equivalence(Recorder& rec) {
  const Experiment ex;
  for (double eps : {0.1, 0.025}) {
    SolverOptions opts;
    opts.t_end = 0.5;
    opts.dt = default_stiff_dt(eps);
    const SolveResult stiff = solve_stiff(ex.field, ex.d, eps, ex.u_in, opts);
    const SolveResult filtered = solve_filtered(ex.field, ex.d, eps, ex.u_in, opts, ex.cfg);
    double worst = 0.0;
    for (std::size_t k = 0; k < stiff.times.size(); ++k) {
      const GridFunction back = pull_back(stiff.states[k], ex.field, ex.cfg, stiff.times[k] / eps);
      worst = std::max(worst, l2_distance(back, filtered.states[k]));
    }
    rec.at_most("eps = " + fmt(eps) + ": max_k |pull_back(u_stiff) - v_filtered|", worst, 1e-2);
  }
}

struct Criterion {
  int id;
  const char* name;
  double budget;
  void (*body)(Recorder&);
};

const Criterion kCriteria[] = {
    {1, "rotation average oracle", 5.0, rotation_average_oracle},
    {2, "gyrokinetic average oracle", 30.0, gyrokinetic_oracle},
    {3, "group property suite", 60.0, group_property_suite},
    {4, "average property suite", 0.0, average_property_suite},
    {5, "corrector closure", 0.0, corrector_closure},
    {6, "solver energy identities", 0.0, solver_energy_identities},
    {7, "convergence experiment", 600.0, convergence_experiment},
    {8, "two-scale pairing", 120.0, pairing_experiment},
    {9, "filtered-stiff equivalence", 0.0, filtered_stiff_equivalence},
};

}  // namespace

int criterion_count() { return static_cast<int>(std::size(kCriteria)); }

std::vector<CriterionResult> run(const Options& opts, const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<CriterionResult> out;
  for (const Criterion& c : kCriteria) {
    if (!opts.only.empty() && !opts.only.count(c.id)) continue;
    CriterionResult r;
    r.id = c.id;
    r.name = c.name;
    r.budget_seconds = c.budget;
    Recorder rec(r);
    const auto start = Clock::now();
    try {
      c.body(rec);
    } catch (const std::exception& e) {
      rec.holds(std::string("exception: ") + e.what(), false);
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.budget > 0.0) rec.at_most("runtime [s]", r.seconds, c.budget);
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::string summary_line(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << " (" << std::fixed << std::setprecision(1)
     << r.seconds << " s)";
  return os.str();
}

}  // namespace stiffavg::acceptance
