#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stiffavg/lab.hpp"

namespace stiffavg::cli {

struct FieldConfig {
  std::string kind = "rotation";  // rotation | gyrokinetic
  double beta = 1.0;
  double gamma = 1.0;
  double omega_c = 1.0;
};

struct DiffusionConfig {
  std::string kind = "identity";  // identity | diagonal | constant | velocity_projector
  std::vector<double> values;     // diagonal entries
  std::vector<std::vector<double>> entries;  // full matrix rows
};

struct GridConfig {
  int dim = 2;
  double half_width = 3.141592653589793;
  int n = 128;
  std::string boundary = "periodic";
};

struct InitialConfig {
  std::string kind = "gaussian";  // gaussian | sine
  std::vector<double> center;
  double sigma = 0.5;
  std::vector<int> mode;
};

struct RunConfig {
  FieldConfig field;
  DiffusionConfig diffusion;
  GridConfig grid;
  FlowIntegratorConfig integrator;

  struct {
    double s = 1.0;
    double half_width = 2.0;
    int random_points = 16;
    std::vector<std::vector<double>> points;
  } flow;

  struct {
    std::string mode = "one_period";
    int s_nodes = 256;
    double base_point = 0.0;
    std::optional<double> cesaro_horizon;
    double half_width = 2.0;
    int lattice_n = 8;
    int random_points = 0;
  } average;

  struct {
    std::string problem = "stiff";
    double eps = 0.1;
    double t_end = 0.25;
    std::optional<double> dt;
    int snapshots = 16;
    double theta = 0.5;
    int transport_order = 4;
    double krylov_tol = 1e-13;
    InitialConfig initial;
  } solve;

  struct {
    std::vector<double> eps_ladder;
    double t_end = 0.5;
    bool use_corrector = true;
    std::string interpolation = "cubic";
    int s_nodes = 64;
    int snapshots = 16;
    double rate_target = 0.9;
    InitialConfig initial;
  } converge;

  struct {
    std::vector<double> eps_ladder;
    double t_end = 1.0;
    std::vector<double> widths;
    int samples_per_period = 48;
    int s_nodes = 64;
  } pairing;

  struct {
    std::string flow, average, average_report, states, energy, converge, converge_summary, pairing;
  } output;

  std::uint64_t seed = 0;

  nlohmann::json effective;  // every key, defaults included
};

/// The full default configuration as JSON.
nlohmann::json default_config();

/// Merges `user` over the defaults (unknown keys are errors), validates and
/// converts. `source` is the raw text used to locate keys for messages.
RunConfig build_config(const nlohmann::json& user, const std::string& source = {});

/// Reads and parses a config file. Errors name the file, line and column or
/// the offending key.
nlohmann::json read_config_file(const std::string& path, std::string* source = nullptr);

/// 64-bit FNV-1a of the compact effective config, as 16 hex digits.
std::string config_digest(const nlohmann::json& effective);

VectorFieldSpec make_field(const RunConfig& cfg);
MatrixFieldFn make_diffusion(const RunConfig& cfg, int dim);
Grid make_config_grid(const GridConfig& g);
GridFunction make_initial(const InitialConfig& init, const Grid& grid);

}  // namespace stiffavg::cli
