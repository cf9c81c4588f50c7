#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "CLI11.hpp"
#include "config.hpp"
#include "stiffavg/acceptance.hpp"
#include "stiffavg/errors.hpp"
#include "stiffavg/kernels.hpp"

#ifndef STIFFAVG_VERSION
#define STIFFAVG_VERSION "unknown"
#endif

namespace stiffavg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename to '" + target.string() + "': " + ec.message());
  }
}

namespace {

struct Context {
  RunConfig cfg;
  std::string subcommand;
  std::string output_dir = ".";
  bool verbose = false;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  void log(const std::string& msg) const {
    if (verbose) *err << "[" << subcommand << "] " << msg << '\n';
  }
  std::string path_for(const std::string& name) const {
    const fs::path p(name);
    return p.is_absolute() ? p.string() : (fs::path(output_dir) / p).string();
  }
};

// CSV or text document with the self-describing '#' header.
class Document {
 public:
  explicit Document(const Context& ctx) {
    body_ << "# stiffavg " << STIFFAVG_VERSION << '\n';
    body_ << "# subcommand: " << ctx.subcommand << '\n';
    body_ << "# config_digest: " << config_digest(ctx.cfg.effective) << '\n';
    body_ << "# config: " << ctx.cfg.effective.dump() << '\n';
  }

  void columns(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) body_ << (i ? "," : "") << names[i];
    body_ << '\n';
  }
  void row(const std::vector<double>& xs) {
    for (std::size_t i = 0; i < xs.size(); ++i) body_ << (i ? "," : "") << format_double(xs[i]);
    body_ << '\n';
    ++rows_;
  }
  void line(const std::string& text) { body_ << text << '\n'; }

  void commit(const Context& ctx, const std::string& name, const std::string& what) const {
    const std::string path = ctx.path_for(name);
    write_atomic(path, body_.str());
    *ctx.out << "wrote " << path << " (" << what;
    if (rows_ > 0) *ctx.out << ", " << rows_ << " rows";
    *ctx.out << ")\n";
  }

 private:
  std::ostringstream body_;
  std::size_t rows_ = 0;
};

std::vector<std::string> coordinate_names(const std::string& prefix, int dim) {
  std::vector<std::string> names;
  for (int d = 1; d <= dim; ++d) names.push_back(prefix + std::to_string(d));
  return names;
}

void require_planar(const RunConfig& cfg, const VectorFieldSpec& field) {
  if (field.dim != 2) {
    throw ConfigurationError("config: field.kind: '" + cfg.field.kind + "' is " + std::to_string(field.dim) +
                             "-D; PDE subcommands need the 2-D rotation field");
  }
  if (cfg.grid.dim != field.dim) throw ConfigurationError("config: grid.dim: must equal the field dimension (2)");
}

MatrixFieldFn weight_for(const RunConfig& cfg, int dim) {
  if (cfg.field.kind == "rotation") return constant_matrix_field(rotation_invariant_weight(cfg.field.beta, cfg.field.gamma));
  return identity_matrix_field(dim);
}

AverageOptions average_options(const RunConfig& cfg, int s_nodes) {
  AverageOptions ao;
  ao.mode = cfg.average.mode == "cesaro" ? AverageMode::cesaro : AverageMode::one_period;
  ao.s_nodes = s_nodes;
  ao.base_point = cfg.average.base_point;
  ao.cesaro_horizon = cfg.average.cesaro_horizon;
  return ao;
}

// ---- flow ----

int cmd_flow(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const VectorFieldSpec field = make_field(c);
  validate_config(c.integrator, field);
  std::vector<Vec> pts;
  for (const auto& p : c.flow.points) {
    Vec y(field.dim);
    for (int d = 0; d < field.dim; ++d) y(d) = p[static_cast<std::size_t>(d)];
    pts.push_back(y);
  }
  const auto random = sample_points(field.dim, c.flow.half_width, 0, c.flow.random_points, c.seed);
  pts.insert(pts.end(), random.begin(), random.end());
  if (pts.empty()) throw ConfigurationError("config: flow.random_points: no points to integrate (flow.points is empty too)");
  ctx.log("integrating " + std::to_string(pts.size()) + " characteristics to s = " + format_double(c.flow.s));

  Document doc(ctx);
  std::vector<std::string> cols{"s"};
  for (auto& n : coordinate_names("y", field.dim)) cols.push_back(n);
  for (auto& n : coordinate_names("Y", field.dim)) cols.push_back(n);
  cols.push_back("detJ");
  cols.push_back("group_residual");
  doc.columns(cols);
  for (const Vec& y : pts) {
    const FlowResult r = flow_advance(field, c.integrator, c.flow.s, y);
    std::vector<double> row{c.flow.s};
    for (int d = 0; d < field.dim; ++d) row.push_back(y(d));
    for (int d = 0; d < field.dim; ++d) row.push_back(r.position(d));
    row.push_back(r.det_jacobian);
    row.push_back(flow_group_check(field, c.integrator, c.flow.s, c.flow.s, y));
    doc.row(row);
  }
  doc.commit(ctx, c.output.flow, "flow samples");
  return kExitOk;
}

// ---- average ----

std::string check_text(const std::string& name, const PropertyCheck& p) {
  std::ostringstream os;
  os << name << ": " << (!p.applicable ? "n/a" : p.passed ? "pass" : "FAIL") << " (margin " << format_double(p.margin)
     << ")";
  return os.str();
}

int cmd_average(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const VectorFieldSpec field = make_field(c);
  const int m = field.dim;
  const MatrixFieldFn d = make_diffusion(c, m);
  const AverageResult avg = ergodic_average(d, field, c.integrator, average_options(c, c.average.s_nodes));
  const std::vector<Vec> pts =
      sample_points(m, c.average.half_width, c.average.lattice_n, c.average.random_points, c.seed);
  if (pts.empty()) {
    throw ConfigurationError(m > 2 ? "config: average.random_points: must be > 0 for fields above 2-D"
                                   : "config: average.lattice_n: no sample points (lattice_n and random_points are 0)");
  }
  ctx.log("averaging at " + std::to_string(pts.size()) + " points");
  const std::vector<Mat> values = sample_nodes(avg.average, pts);

  Document doc(ctx);
  std::vector<std::string> cols = coordinate_names("y", m);
  for (int i = 1; i <= m; ++i)
    for (int k = 1; k <= m; ++k) cols.push_back("D" + std::to_string(i) + std::to_string(k));
  doc.columns(cols);
  double max_asym = 0.0, min_eig = INFINITY;
  for (std::size_t p = 0; p < pts.size(); ++p) {
    std::vector<double> row;
    for (int i = 0; i < m; ++i) row.push_back(pts[p](i));
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k) row.push_back(values[p](i, k));
    doc.row(row);
    max_asym = std::max(max_asym, asymmetry(values[p]));
    min_eig = std::min(min_eig, min_eigenvalue(values[p]));
  }

  Document report(ctx);
  report.line("field: " + field.name);
  report.line("mode: " + c.average.mode);
  report.line("s_nodes: " + std::to_string(avg.quadrature_nodes_in_s));
  report.line("sample_points: " + std::to_string(pts.size()));
  report.line("max_asymmetry: " + format_double(max_asym));
  report.line("min_eigenvalue: " + format_double(min_eig));
  bool ok = true;
  if (m <= 2) {
    const MatrixFieldFn p = weight_for(c, m);
    const MatrixFieldFn q = constant_matrix_field(p(Vec::Zero(m)).inverse());
    const int n = std::max(c.average.lattice_n, 1);
    const WeightedQuadrature quad = make_midpoint_quadrature(m, c.average.half_width, n, p, q);
    // Coercivity is checked against the input's own weighted constant.
    const std::vector<Mat> roots = weight_sqrt_at_nodes(quad);
    const std::vector<Mat> in = sample_nodes(d, quad.nodes);
    double alpha = INFINITY;
    for (std::size_t k = 0; k < in.size(); ++k) alpha = std::min(alpha, min_eigenvalue(roots[k] * in[k] * roots[k]));
    const AveragePropertiesReport rep = average_properties_check(d, avg, quad, std::max(alpha, 0.0));
    report.line("quadrature: " + std::to_string(n) + "^" + std::to_string(m) + " midpoint nodes on [-" +
                format_double(c.average.half_width) + ", " + format_double(c.average.half_width) + "]");
    report.line("coercivity_alpha: " + format_double(std::max(alpha, 0.0)));
    report.line(check_text("symmetry", rep.symmetry));
    report.line(check_text("positivity", rep.positivity));
    report.line(check_text("coercivity", rep.coercivity));
    report.line(check_text("hq_contraction", rep.hq_contraction) + " " + format_double(rep.hq_average) +
                " <= " + format_double(rep.hq_input));
    report.line(check_text("hq_inf_contraction", rep.hq_inf_contraction) + " " +
                format_double(rep.hq_inf_average) + " <= " + format_double(rep.hq_inf_input));
    ok = rep.all_passed();
  }
  report.line(std::string("all_passed: ") + (ok ? "true" : "false"));

  doc.commit(ctx, c.output.average, "averaged tensor");
  report.commit(ctx, c.output.average_report, "properties report");
  return kExitOk;
}

// ---- solve ----

int cmd_solve(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const VectorFieldSpec field = make_field(c);
  require_planar(c, field);
  const Grid grid = make_config_grid(c.grid);
  const MatrixFieldFn d = make_diffusion(c, field.dim);
  const GridFunction u0 = make_initial(c.solve.initial, grid);

  SolverOptions so;
  so.t_end = c.solve.t_end;
  so.snapshots = c.solve.snapshots;
  so.theta = c.solve.theta;
  so.krylov_tol = c.solve.krylov_tol;
  so.transport_order = c.solve.transport_order;
  so.dt = c.solve.dt ? *c.solve.dt : (c.solve.problem == "stiff" ? default_stiff_dt(c.solve.eps) : 1e-3);

  ctx.log(c.solve.problem + " solve, n = " + std::to_string(grid.n) + ", dt = " + format_double(so.dt));
  SolveResult r;
  if (c.solve.problem == "stiff") {
    r = solve_stiff(field, d, c.solve.eps, u0, so);
  } else if (c.solve.problem == "filtered") {
    r = solve_filtered(field, d, c.solve.eps, u0, so, c.integrator);
  } else {
    const AverageResult avg = ergodic_average(d, field, c.integrator, average_options(c, c.average.s_nodes));
    r = solve_limit(materialize(avg, grid.half_width, grid.n), u0, so);
  }
  for (const auto& w : r.warnings) *ctx.err << "warning: " << w << '\n';

  Document states(ctx);
  std::vector<std::string> cols{"t"};
  for (auto& n : coordinate_names("y", grid.dim)) cols.push_back(n);
  cols.push_back("u");
  states.columns(cols);
  const std::vector<Vec> nodes = grid.nodes();
  for (std::size_t k = 0; k < r.states.size(); ++k) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      std::vector<double> row{r.times[k]};
      for (int dd = 0; dd < grid.dim; ++dd) row.push_back(nodes[i](dd));
      row.push_back(r.states[k].values[i]);
      states.row(row);
    }
  }

  Document energy(ctx);
  energy.columns({"t", "half_l2_sq", "dissipation"});
  for (const EnergyRecord& e : r.energy_trace) energy.row({e.t, e.half_l2_sq, e.dissipation});

  states.commit(ctx, c.output.states, r.method + " states");
  energy.commit(ctx, c.output.energy, "energy trace");
  *ctx.out << "max_energy_residual " << format_double(r.max_energy_residual) << ", max_l2_increase "
           << format_double(r.max_l2_increase) << ", krylov_iterations " << r.total_krylov_iterations << '\n';
  return kExitOk;
}

// ---- converge ----

int cmd_converge(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const VectorFieldSpec field = make_field(c);
  require_planar(c, field);
  const Grid grid = make_config_grid(c.grid);
  const MatrixFieldFn d = make_diffusion(c, field.dim);

  const AverageResult avg = ergodic_average(d, field, c.integrator, average_options(c, c.converge.s_nodes));
  ConvergenceSetup s;
  s.field = field;
  s.cfg = c.integrator;
  s.d = d;
  s.average = materialize(avg, grid.half_width, grid.n);
  s.p_weight = weight_for(c, field.dim);
  s.u_in = make_initial(c.converge.initial, grid);
  s.t_end = c.converge.t_end;
  s.eps_ladder = c.converge.eps_ladder;
  s.use_corrector = c.converge.use_corrector;
  s.snapshots = c.converge.snapshots;
  s.transport_order = c.solve.transport_order;
  s.interpolation = c.converge.interpolation == "cubic" ? Interpolation::cubic : Interpolation::bilinear;
  s.rate_target = c.converge.rate_target;
  if (s.use_corrector) {
    ctx.log("building the corrector");
    CorrectorOptions co;
    co.s_nodes = c.converge.s_nodes;
    const CorrectorResult cr =
        corrector_solve(d, avg, field, c.integrator, make_midpoint_quadrature(2, 2.0, 8), co);
    s.corrector = materialize_field(cr.corrector, grid.half_width, grid.n);
  }
  ctx.log("running " + std::to_string(s.eps_ladder.size()) + " stiff solves");
  const ConvergenceReport r = convergence_study(s);
  for (const auto& w : r.warnings) *ctx.err << "warning: " << w << '\n';

  Document csv(ctx);
  csv.columns({"eps", "error_state", "error_lab", "error_grad_p", "error_corrected"});
  for (std::size_t i = 0; i < r.eps_ladder.size(); ++i) {
    csv.row({r.eps_ladder[i], r.errors_linf_l2[i], r.errors_lab[i], r.errors_grad_xp[i],
             r.with_corrector ? r.errors_corrected[i] : NAN});
  }

  Document summary(ctx);
  summary.line("eps_ladder_size: " + std::to_string(r.eps_ladder.size()));
  summary.line("rate: " + format_double(r.fit.rate));
  summary.line("intercept: " + format_double(r.fit.intercept));
  summary.line("grad_rate: " + format_double(r.grad_fit.rate));
  summary.line("rate_target: " + format_double(c.converge.rate_target));
  summary.line(std::string("monotone: ") + (r.monotone ? "true" : "false"));
  summary.line(std::string("with_corrector: ") + (r.with_corrector ? "true" : "false"));
  if (r.with_corrector) summary.line(std::string("corrector_gain: ") + (r.corrector_gain ? "true" : "false"));
  summary.line("warnings: " + std::to_string(r.warnings.size()));
  for (const auto& w : r.warnings) summary.line("  " + w);
  summary.line(std::string("pass: ") + (r.pass ? "true" : "false"));

  csv.commit(ctx, c.output.converge, "convergence errors");
  summary.commit(ctx, c.output.converge_summary, "convergence summary");
  *ctx.out << "rate " << format_double(r.fit.rate) << ", grad rate " << format_double(r.grad_fit.rate) << ": "
           << (r.pass ? "pass" : "FAIL") << '\n';
  return r.pass ? kExitOk : kExitFailed;
}

// ---- pairing ----

int cmd_pairing(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const VectorFieldSpec field = make_field(c);
  require_planar(c, field);
  const Grid grid = make_config_grid(c.grid);
  if (static_cast<int>(c.pairing.widths.size()) != grid.dim) {
    throw ConfigurationError("config: pairing.widths: needs " + std::to_string(grid.dim) + " entries");
  }
  const MatrixFieldFn d = make_diffusion(c, field.dim);

  // theta = w = grad g, g an anisotropic Gaussian, constant in t.
  std::vector<Vec> grad(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec y = grid.node(i);
    double q = 0.0;
    for (int k = 0; k < grid.dim; ++k) q += y(k) * y(k) / (c.pairing.widths[k] * c.pairing.widths[k]);
    const double e = std::exp(-0.5 * q);
    Vec g(grid.dim);
    for (int k = 0; k < grid.dim; ++k) g(k) = -y(k) / (c.pairing.widths[k] * c.pairing.widths[k]) * e;
    grad[i] = g;
  }
  TimeSampledField theta;
  theta.times = {0.0, c.pairing.t_end};
  theta.values = {grad, grad};

  const AverageResult avg = ergodic_average(d, field, c.integrator, average_options(c, c.pairing.s_nodes));
  PairingOptions po;
  po.samples_per_period = c.pairing.samples_per_period;
  const PairingReport r = two_scale_pairing(theta, theta, grid, d, avg, field, c.integrator, c.pairing.eps_ladder, po);

  Document csv(ctx);
  csv.columns({"eps", "pairing", "limit", "deviation"});
  for (std::size_t i = 0; i < r.eps_ladder.size(); ++i) {
    csv.row({r.eps_ladder[i], r.pairing_values[i], r.limit_value, r.deviations[i]});
  }
  csv.commit(ctx, c.output.pairing, "two-scale pairing");
  const bool pass = r.deviations.back() < r.deviations.front();
  *ctx.out << "deviation ratio " << format_double(r.deviations.back() / r.deviations.front()) << ": "
           << (pass ? "pass" : "FAIL") << '\n';
  return pass ? kExitOk : kExitFailed;
}

// ---- selftest ----

int cmd_selftest(const Context& ctx, const std::vector<int>& only) {
  acceptance::Options opts;
  opts.only.insert(only.begin(), only.end());
  opts.verbose = ctx.verbose;
  const auto results = acceptance::run(opts, [&](const acceptance::CriterionResult& r) {
    *ctx.out << acceptance::summary_line(r) << '\n';
    if (ctx.verbose || !r.passed) {
      for (const auto& d : r.details) *ctx.out << "    " << d << '\n';
    }
    ctx.out->flush();
  });
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed;
  *ctx.out << passed << "/" << results.size() << " criteria passed\n";
  return passed == results.size() ? kExitOk : kExitFailed;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stiff transport-diffusion averaging toolkit", "stiffavg"};
  app.set_version_flag("--version", STIFFAVG_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, output_dir = ".";
  int threads = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON config file (required except for selftest)");
  app.add_option("--output-dir", output_dir, "Directory for relative output paths");
  app.add_option("--threads", threads, "OpenMP threads, 0 = runtime default")->check(CLI::NonNegativeNumber);
  app.add_flag("--verbose,-v", verbose, "Progress messages on stderr");

  app.add_subcommand("flow", "Characteristics Y(s; y) with det and group residual");
  app.add_subcommand("average", "Ergodic average <D> sampled on points, plus a properties report");
  CLI::App* solve = app.add_subcommand("solve", "One PDE solve (stiff, filtered or limit)");
  app.add_subcommand("converge", "Epsilon-ladder convergence study");
  app.add_subcommand("pairing", "Two-scale pairing against its averaged limit");
  CLI::App* selftest = app.add_subcommand("selftest", "Run the acceptance suite");

  std::optional<std::string> problem, boundary, output, energy_output;
  std::optional<double> eps, t_end, dt, box_l;
  std::optional<int> grid_n;
  solve->add_option("--problem", problem, "stiff | filtered | limit")
      ->check(CLI::IsMember({"stiff", "filtered", "limit"}));
  solve->add_option("--eps", eps, "Stiffness parameter");
  solve->add_option("--t-end", t_end, "Final time");
  solve->add_option("--dt", dt, "Time step");
  solve->add_option("--grid-n", grid_n, "Nodes per axis");
  solve->add_option("--box-l", box_l, "Half width L of [-L, L]^m");
  solve->add_option("--boundary", boundary, "periodic | dirichlet")->check(CLI::IsMember({"periodic", "dirichlet"}));
  solve->add_option("--output", output, "States CSV");
  solve->add_option("--energy-output", energy_output, "Energy trace CSV");

  std::vector<int> only;
  selftest->add_option("--only", only, "Criterion ids to run (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << STIFFAVG_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Name the first bare word that is not a subcommand, if any.
    std::string unknown;
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (a == "--config" || a == "--output-dir" || a == "--threads") {
        ++i;
      } else if (!a.empty() && a[0] != '-') {
        if (!app.get_subcommand_no_throw(a)) unknown = a;
        break;
      }
    }
    if (!unknown.empty()) {
      err << "error: unknown subcommand '" << unknown << "'\n\n" << app.help();
    } else {
      err << "error: " << e.what() << "\n\n" << app.help();
    }
    return kExitUsage;
  }

  Context ctx;
  ctx.subcommand = app.get_subcommands().front()->get_name();
  ctx.output_dir = output_dir;
  ctx.verbose = verbose;
  ctx.out = &out;
  ctx.err = &err;
  kernels::set_threads(threads);

  if (ctx.subcommand == "selftest") {
    try {
      return cmd_selftest(ctx, only);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitRuntime;
    }
  }
  if (config_path.empty()) {
    err << "error: --config is required for '" << ctx.subcommand << "'\n\n" << app.help();
    return kExitUsage;
  }

  try {
    std::string source;
    json user = read_config_file(config_path, &source);
    if (!user.is_object()) throw ConfigurationError("config: " + config_path + ": top level must be an object");
    // Command-line overrides go through the config so they show up in the digest.
    if (problem) user["solve"]["problem"] = *problem;
    if (eps) user["solve"]["eps"] = *eps;
    if (t_end) user["solve"]["t_end"] = *t_end;
    if (dt) user["solve"]["dt"] = *dt;
    if (grid_n) user["grid"]["n"] = *grid_n;
    if (box_l) user["grid"]["half_width"] = *box_l;
    if (boundary) user["grid"]["boundary"] = *boundary;
    if (output) user["output"]["states"] = *output;
    if (energy_output) user["output"]["energy"] = *energy_output;
    ctx.cfg = build_config(user, source);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (ctx.subcommand == "flow") return cmd_flow(ctx);
    if (ctx.subcommand == "average") return cmd_average(ctx);
    if (ctx.subcommand == "solve") return cmd_solve(ctx);
    if (ctx.subcommand == "converge") return cmd_converge(ctx);
    return cmd_pairing(ctx);
  } catch (const ConfigurationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace stiffavg::cli
