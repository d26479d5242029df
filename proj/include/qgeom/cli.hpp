#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgeom/chart.hpp"

namespace qgeom::cli {

enum ExitCode : int {
  kPass = 0,
  kVerificationFailure = 1,
  kConfigError = 2,
  kModelError = 3,
  kOffShell = 4,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OffShellInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  std::string name;
  double a = 1.0;
  double m = 1.0;
  double q = 0.0;
  double E = 0.0;
  double B = 0.0;
  // random model
  int n = 3;
  int rank = 1;
  int dim = 2;
  int negative = 0;
  double scale = 0.3;
};

struct GridSpec {
  std::vector<int> counts;
  std::vector<Interval> box;  // empty: model default box
  double margin = 0.0;
};

struct SampleSpec {
  int count = 0;
  std::vector<Interval> box;
};

struct RayInput {
  std::vector<double> x;  // t, x, y, z
  std::vector<double> k;  // k_1..k_3 (k_0 from the mass shell) or k_0..k_3
};

struct TraceConfig {
  double tau_end = 10.0;
  double dt = 1e-3;
  bool spinor = true;
  bool no_name = true;
  bool halving = false;
};

struct RunConfig {
  ModelConfig model;
  std::vector<Point> points;
  std::optional<GridSpec> grid;
  std::optional<SampleSpec> sample;
  std::vector<double> momentum{0.0, 0.0, 0.0};  // for spacetime-only grids of Dirac models
  std::optional<double> step;
  FdScheme scheme = FdScheme::central4;
  std::map<std::string, double> tolerances;  // overrides of default_tolerances()
  std::string out_dir;
  std::string format = "json";
  bool tidy = false;
  std::uint64_t seed = 0;
  std::string what = "qgt";
  std::vector<RayInput> rays;
  TraceConfig trace;
  nlohmann::json source;
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig parse_config(const nlohmann::json& doc);

const std::map<std::string, double>& default_tolerances();

/// Registered model names with their parameters and defaults.
nlohmann::json models_listing();

/// Reports carry `schema: 1`; `timestamp` is the only run-dependent field.
nlohmann::json cmd_verify(const RunConfig& config, int workers);
nlohmann::json cmd_eval(const RunConfig& config, int workers);
/// Per-ray trajectories are written to `out_dir` as ray_<i>.csv.
nlohmann::json cmd_trace(const RunConfig& config, int workers, const std::string& out_dir);

/// Flat table of an eval report.
void write_eval_csv(std::ostream& out, const nlohmann::json& report);
/// Long format: point, tensor, component, value.
void write_eval_tidy_csv(std::ostream& out, const nlohmann::json& report);
void write_verify_csv(std::ostream& out, const nlohmann::json& report);

/// Full command line without the program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace qgeom::cli
