#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "stiffavg/errors.hpp"

namespace stiffavg::cli {

using nlohmann::json;

json default_config() {
  return json{
      {"field", {{"kind", "rotation"}, {"beta", 1.0}, {"gamma", 1.0}, {"omega_c", 1.0}}},
      {"diffusion", {{"kind", "identity"}, {"values", json::array()}, {"entries", json::array()}}},
      {"grid", {{"dim", 2}, {"half_width", std::numbers::pi}, {"n", 128}, {"boundary", "periodic"}}},
      {"integrator", {{"method", "rk4"}, {"step", 1e-3}, {"tolerance", 1e-8}}},
      {"flow", {{"s", 1.0}, {"half_width", 2.0}, {"random_points", 16}, {"points", json::array()}}},
      {"average",
       {{"mode", "one_period"},
        {"s_nodes", 256},
        {"base_point", 0.0},
        {"cesaro_horizon", nullptr},
        {"half_width", 2.0},
        {"lattice_n", 8},
        {"random_points", 0}}},
      {"solve",
       {{"problem", "stiff"},
        {"eps", 0.1},
        {"t_end", 0.25},
        {"dt", nullptr},
        {"snapshots", 16},
        {"theta", 0.5},
        {"transport_order", 4},
        {"krylov_tol", 1e-13},
        {"initial", {{"kind", "gaussian"}, {"center", {0.5, 0.0}}, {"sigma", 0.5}, {"mode", {1, 0}}}}}},
      {"converge",
       {{"eps_ladder", {0.2, 0.1, 0.05, 0.025}},
        {"t_end", 0.5},
        {"use_corrector", true},
        {"interpolation", "cubic"},
        {"s_nodes", 64},
        {"snapshots", 16},
        {"rate_target", 0.9},
        {"initial", {{"kind", "gaussian"}, {"center", {0.5, 0.0}}, {"sigma", 3.0}, {"mode", {1, 0}}}}}},
      {"pairing",
       {{"eps_ladder", {0.2, 0.1, 0.05}},
        {"t_end", 1.0},
        {"widths", {1.0, 0.5}},
        {"samples_per_period", 48},
        {"s_nodes", 64}}},
      {"output",
       {{"flow", "flow.csv"},
        {"average", "average.csv"},
        {"average_report", "average_report.txt"},
        {"states", "states.csv"},
        {"energy", "energy.csv"},
        {"converge", "converge.csv"},
        {"converge_summary", "converge_summary.txt"},
        {"pairing", "pairing.csv"}}},
      {"seed", 0},
  };
}

namespace {

// 1-based line of the first occurrence of "key" in the source text.
int line_of_key(const std::string& source, const std::string& key) {
  if (source.empty() || key.empty()) return 0;
  const std::size_t pos = source.find("\"" + key + "\"");
  if (pos == std::string::npos) return 0;
  int line = 1;
  for (std::size_t i = 0; i < pos; ++i) line += source[i] == '\n';
  return line;
}

class Reader {
 public:
  explicit Reader(const std::string& source) : source_(source) {}

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    std::ostringstream os;
    os << "config: " << path << ": " << msg;
    const std::string leaf = path.substr(path.find_last_of('.') + 1);
    if (const int line = line_of_key(source_, leaf)) os << " (line " << line << ")";
    throw ConfigurationError(os.str());
  }

  void merge(json& base, const json& user, const std::string& path) const {
    if (!user.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
    for (auto it = user.begin(); it != user.end(); ++it) {
      const std::string key = path.empty() ? it.key() : path + "." + it.key();
      if (!base.contains(it.key())) fail(key, "unknown key");
      json& slot = base[it.key()];
      if (slot.is_object() && !it.value().is_null()) {
        merge(slot, it.value(), key);
      } else {
        slot = it.value();
      }
    }
  }

  const json& at(const json& j, const std::string& path) const {
    const json* cur = &j;
    std::size_t start = 0;
    while (start <= path.size()) {
      const std::size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      cur = &(*cur)[key];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return *cur;
  }

  double number(const json& j, const std::string& path) const {
    const json& v = at(j, path);
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "must be finite");
    return x;
  }
  double positive(const json& j, const std::string& path) const {
    const double x = number(j, path);
    if (!(x > 0.0)) fail(path, "must be > 0 (got " + v2s(x) + ")");
    return x;
  }
  std::optional<double> optional_positive(const json& j, const std::string& path) const {
    if (at(j, path).is_null()) return std::nullopt;
    return positive(j, path);
  }
  int integer(const json& j, const std::string& path, int lo, int hi) const {
    const json& v = at(j, path);
    if (!v.is_number_integer()) fail(path, "expected an integer");
    const long long x = v.get<long long>();
    if (x < lo || x > hi) fail(path, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(x);
  }
  bool boolean(const json& j, const std::string& path) const {
    const json& v = at(j, path);
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
  }
  std::string choice(const json& j, const std::string& path, std::initializer_list<const char*> allowed) const {
    const json& v = at(j, path);
    if (!v.is_string()) fail(path, "expected a string");
    const std::string s = v.get<std::string>();
    std::string list;
    for (const char* a : allowed) {
      if (s == a) return s;
      list += list.empty() ? a : std::string(", ") + a;
    }
    fail(path, "'" + s + "' is not one of {" + list + "}");
  }
  std::string text(const json& j, const std::string& path) const {
    const json& v = at(j, path);
    if (!v.is_string() || v.get<std::string>().empty()) fail(path, "expected a non-empty string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const json& j, const std::string& path) const {
    const json& v = at(j, path);
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number()) fail(path, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<std::vector<double>> rows(const json& j, const std::string& path) const {
    const json& v = at(j, path);
    if (!v.is_array()) fail(path, "expected an array of arrays");
    std::vector<std::vector<double>> out;
    for (const json& r : v) {
      if (!r.is_array()) fail(path, "expected an array of arrays");
      std::vector<double> row;
      for (const json& e : r) {
        if (!e.is_number()) fail(path, "expected numeric entries");
        row.push_back(e.get<double>());
      }
      out.push_back(std::move(row));
    }
    return out;
  }

  static std::string v2s(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  }

 private:
  const std::string& source_;
};

InitialConfig read_initial(const Reader& r, const json& j, const std::string& base) {
  InitialConfig init;
  init.kind = r.choice(j, base + ".kind", {"gaussian", "sine"});
  init.center = r.numbers(j, base + ".center");
  init.sigma = r.positive(j, base + ".sigma");
  for (double m : r.numbers(j, base + ".mode")) {
    if (m != std::floor(m)) r.fail(base + ".mode", "entries must be integers");
    init.mode.push_back(static_cast<int>(m));
  }
  return init;
}

void check_ladder(const Reader& r, const std::vector<double>& ladder, const std::string& path, std::size_t min_size) {
  if (ladder.size() < min_size) r.fail(path, "needs at least " + std::to_string(min_size) + " entries");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0)) r.fail(path, "entries must be > 0");
    if (i > 0 && !(ladder[i] < ladder[i - 1])) r.fail(path, "entries must be strictly decreasing");
  }
}

}  // namespace

RunConfig build_config(const json& user, const std::string& source) {
  const Reader r(source);
  json j = default_config();
  r.merge(j, user, "");

  RunConfig c;
  c.field.kind = r.choice(j, "field.kind", {"rotation", "gyrokinetic"});
  c.field.beta = r.positive(j, "field.beta");
  c.field.gamma = r.positive(j, "field.gamma");
  c.field.omega_c = r.number(j, "field.omega_c");
  if (c.field.omega_c == 0.0) r.fail("field.omega_c", "must be nonzero");

  c.diffusion.kind = r.choice(j, "diffusion.kind", {"identity", "diagonal", "constant", "velocity_projector"});
  c.diffusion.values = r.numbers(j, "diffusion.values");
  c.diffusion.entries = r.rows(j, "diffusion.entries");

  c.grid.dim = r.integer(j, "grid.dim", 1, 2);
  c.grid.half_width = r.positive(j, "grid.half_width");
  c.grid.n = r.integer(j, "grid.n", 16, 8192);
  c.grid.boundary = r.choice(j, "grid.boundary", {"periodic", "dirichlet"});

  const std::string method = r.choice(j, "integrator.method", {"rk4", "analytic"});
  c.integrator.method = method == "rk4" ? FlowMethod::rk4 : FlowMethod::analytic;
  c.integrator.step = r.positive(j, "integrator.step");
  c.integrator.tolerance = r.positive(j, "integrator.tolerance");

  c.flow.s = r.number(j, "flow.s");
  c.flow.half_width = r.positive(j, "flow.half_width");
  c.flow.random_points = r.integer(j, "flow.random_points", 0, 1'000'000);
  c.flow.points = r.rows(j, "flow.points");

  c.average.mode = r.choice(j, "average.mode", {"one_period", "cesaro"});
  c.average.s_nodes = r.integer(j, "average.s_nodes", 16, 1 << 20);
  c.average.base_point = r.number(j, "average.base_point");
  c.average.cesaro_horizon = r.optional_positive(j, "average.cesaro_horizon");
  if (c.average.mode == "cesaro" && !c.average.cesaro_horizon) {
    r.fail("average.cesaro_horizon", "required when average.mode is 'cesaro'");
  }
  c.average.half_width = r.positive(j, "average.half_width");
  c.average.lattice_n = r.integer(j, "average.lattice_n", 0, 4096);
  c.average.random_points = r.integer(j, "average.random_points", 0, 1'000'000);

  c.solve.problem = r.choice(j, "solve.problem", {"stiff", "filtered", "limit"});
  c.solve.eps = r.positive(j, "solve.eps");
  c.solve.t_end = r.positive(j, "solve.t_end");
  c.solve.dt = r.optional_positive(j, "solve.dt");
  c.solve.snapshots = r.integer(j, "solve.snapshots", 1, 100000);
  c.solve.theta = r.number(j, "solve.theta");
  if (c.solve.theta < 0.0 || c.solve.theta > 1.0) r.fail("solve.theta", "must lie in [0, 1]");
  c.solve.transport_order = r.integer(j, "solve.transport_order", 2, 4);
  if (c.solve.transport_order == 3) r.fail("solve.transport_order", "must be 2 or 4");
  c.solve.krylov_tol = r.positive(j, "solve.krylov_tol");
  c.solve.initial = read_initial(r, j, "solve.initial");

  c.converge.eps_ladder = r.numbers(j, "converge.eps_ladder");
  check_ladder(r, c.converge.eps_ladder, "converge.eps_ladder", 3);
  c.converge.t_end = r.positive(j, "converge.t_end");
  c.converge.use_corrector = r.boolean(j, "converge.use_corrector");
  c.converge.interpolation = r.choice(j, "converge.interpolation", {"bilinear", "cubic"});
  c.converge.s_nodes = r.integer(j, "converge.s_nodes", 16, 1 << 20);
  c.converge.snapshots = r.integer(j, "converge.snapshots", 1, 100000);
  c.converge.rate_target = r.number(j, "converge.rate_target");
  c.converge.initial = read_initial(r, j, "converge.initial");

  c.pairing.eps_ladder = r.numbers(j, "pairing.eps_ladder");
  check_ladder(r, c.pairing.eps_ladder, "pairing.eps_ladder", 2);
  c.pairing.t_end = r.positive(j, "pairing.t_end");
  c.pairing.widths = r.numbers(j, "pairing.widths");
  if (c.pairing.widths.empty()) r.fail("pairing.widths", "needs one width per grid axis");
  for (double w : c.pairing.widths) {
    if (!(w > 0.0)) r.fail("pairing.widths", "entries must be > 0");
  }
  c.pairing.samples_per_period = r.integer(j, "pairing.samples_per_period", 8, 1 << 20);
  c.pairing.s_nodes = r.integer(j, "pairing.s_nodes", 16, 1 << 20);

  c.output.flow = r.text(j, "output.flow");
  c.output.average = r.text(j, "output.average");
  c.output.average_report = r.text(j, "output.average_report");
  c.output.states = r.text(j, "output.states");
  c.output.energy = r.text(j, "output.energy");
  c.output.converge = r.text(j, "output.converge");
  c.output.converge_summary = r.text(j, "output.converge_summary");
  c.output.pairing = r.text(j, "output.pairing");

  const json& seed = j["seed"];
  if (!seed.is_number_integer() || seed.get<long long>() < 0) r.fail("seed", "expected a non-negative integer");
  c.seed = seed.get<std::uint64_t>();

  // Cross-checks that need several keys.
  const int field_dim = c.field.kind == "gyrokinetic" ? 6 : 2;
  if (c.diffusion.kind == "diagonal" && static_cast<int>(c.diffusion.values.size()) != field_dim) {
    r.fail("diffusion.values", "needs " + std::to_string(field_dim) + " entries for field '" + c.field.kind + "'");
  }
  if (c.diffusion.kind == "constant") {
    if (static_cast<int>(c.diffusion.entries.size()) != field_dim) {
      r.fail("diffusion.entries", "needs " + std::to_string(field_dim) + " rows");
    }
    for (const auto& row : c.diffusion.entries) {
      if (static_cast<int>(row.size()) != field_dim) {
        r.fail("diffusion.entries", "rows need " + std::to_string(field_dim) + " entries");
      }
    }
  }
  if (c.diffusion.kind == "velocity_projector" && c.field.kind != "gyrokinetic") {
    r.fail("diffusion.kind", "'velocity_projector' needs the gyrokinetic field");
  }
  for (const auto& p : c.flow.points) {
    if (static_cast<int>(p.size()) != field_dim) r.fail("flow.points", "points need " + std::to_string(field_dim) + " coordinates");
  }
  if (c.integrator.method == FlowMethod::analytic && c.field.kind != "rotation" && c.field.kind != "gyrokinetic") {
    r.fail("integrator.method", "no closed-form flow for this field");
  }

  c.effective = j;
  return c;
}

json read_config_file(const std::string& path, std::string* source) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (source) *source = text;
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << "config: " << path << ":" << line << ":" << col << ": parse error: " << e.what();
    throw ConfigurationError(os.str());
  }
}

std::string config_digest(const json& effective) {
  const std::string text = effective.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

VectorFieldSpec make_field(const RunConfig& cfg) {
  if (cfg.field.kind == "gyrokinetic") return gyrokinetic_field(cfg.field.omega_c);
  return rotation_field(cfg.field.beta, cfg.field.gamma);
}

MatrixFieldFn make_diffusion(const RunConfig& cfg, int dim) {
  const auto& d = cfg.diffusion;
  if (d.kind == "identity") return identity_matrix_field(dim);
  Mat m = Mat::Zero(dim, dim);
  if (d.kind == "diagonal") {
    if (static_cast<int>(d.values.size()) < dim) throw ConfigurationError("config: diffusion.values: too few entries");
    for (int i = 0; i < dim; ++i) m(i, i) = d.values[static_cast<std::size_t>(i)];
  } else if (d.kind == "constant") {
    for (int i = 0; i < dim; ++i)
      for (int k = 0; k < dim; ++k) m(i, k) = d.entries[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  } else {  // velocity_projector
    for (int i = 3; i < 6; ++i) m(i, i) = 1.0;
  }
  return constant_matrix_field(m);
}

Grid make_config_grid(const GridConfig& g) {
  return make_grid(g.dim, g.half_width, g.n, g.boundary == "periodic" ? Boundary::periodic : Boundary::homogeneous_dirichlet);
}

GridFunction make_initial(const InitialConfig& init, const Grid& grid) {
  const int dim = grid.dim;
  if (init.kind == "gaussian") {
    if (static_cast<int>(init.center.size()) < dim) throw ConfigurationError("config: initial.center: too few coordinates");
    const std::vector<double> c = init.center;
    const double s2 = init.sigma * init.sigma;
    return sample_function(grid, [c, s2, dim](const Vec& y) {
      double r2 = 0.0;
      for (int d = 0; d < dim; ++d) r2 += (y(d) - c[static_cast<std::size_t>(d)]) * (y(d) - c[static_cast<std::size_t>(d)]);
      return std::exp(-r2 / (2.0 * s2));
    });
  }
  if (static_cast<int>(init.mode.size()) < dim) throw ConfigurationError("config: initial.mode: too few entries");
  const std::vector<int> mode = init.mode;
  const double k = std::numbers::pi / grid.half_width;
  return sample_function(grid, [mode, k, dim](const Vec& y) {
    double v = 1.0;
    for (int d = 0; d < dim; ++d) {
      const int m = mode[static_cast<std::size_t>(d)];
      if (m != 0) v *= std::sin(m * k * y(d));
    }
    return v;
  });
}

}  // namespace stiffavg::cli
