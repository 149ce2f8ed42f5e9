#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehom/environment.hpp"
#include "ehom/solver.hpp"

namespace ehom::app {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kValidationFailure = 2,
  kNonConvergence = 3,
  kCheckFailure = 4,
};

struct SolverConfig {
  double tol = 1e-10;
  int max_iter = 20000;
  Preconditioner preconditioner = Preconditioner::multigrid;
};

struct SweepConfig {
  std::vector<int> sizes;
  int seeds = 1;
};

struct SublinearityConfig {
  double radius = 0.25;
  std::vector<int> sizes;
  int seeds = 1;
};

struct AuditConfig {
  double sigma_prime = 0.5;
  double sigma = 1.0;
  double radius = 0.25;
  std::optional<double> alpha; ///< defaults to 2 p*
  int truncation = 64;
  int component = 0;
  std::vector<int> sizes;
};

struct MonteCarloConfig {
  int paths = 10000;
  double t_max = 1.0;
  double record_stride = 0.0;
  std::string theta = "none"; ///< none | constant | Lambda | lambda
  double theta_value = 1.0;
  int trace_paths = 0;
  bool random_start = false;
  double ks_threshold = 0.01;
  double cov_tolerance = 0.05;
};

struct OracleConfig {
  std::vector<std::vector<double>> D;
  double tolerance = 0.0;
};

/// Everything the pipeline needs; validated as a whole before any compute.
struct RunConfig {
  EnvironmentSpec environment;
  int cells_per_side = 64;
  std::optional<double> spacing; ///< defaults to 1/N (unit box)
  double p = kInf;
  double q = kInf;
  SolverConfig solver;
  std::optional<SweepConfig> moment_sweep;
  int random_directions = 20;
  std::optional<SublinearityConfig> sublinearity;
  std::optional<AuditConfig> audit;
  std::optional<MonteCarloConfig> montecarlo;
  std::optional<OracleConfig> oracle;
  std::vector<std::string> stages;
  std::filesystem::path output_dir = "ehom-out";
  std::uint64_t seed = 0;
  int threads = 1;
  nlohmann::json source; ///< the parsed config, echoed into the report

  double effective_spacing() const { return spacing.value_or(1.0 / cells_per_side); }
};

/// Parses and validates; throws ConfigError naming the offending parameter.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Built-in D oracle for the preset, if one exists: 2c I for (scaled)
/// identities, series/parallel means for laminates, 2 sqrt(ab) I for d = 2
/// checkerboards. The config's `oracle` block takes precedence.
std::optional<OracleConfig> default_oracle(const RunConfig& config);

struct RunOptions {
  bool check = false;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// Runs `stages` (plus whatever they depend on) and writes artifacts and
/// report.json into the output directory. Returns the report.
nlohmann::json run_pipeline(RunConfig config, const std::vector<std::string>& stages, const RunOptions& options);

/// Outcome of --check recorded in the report.
bool report_check_passed(const nlohmann::json& report);

/// Renders a stored report. csv writes one file per curve into `out_dir` and
/// returns the list of files; json and md return the rendered text.
std::string render_report(const nlohmann::json& report, const std::string& format,
                          const std::filesystem::path& out_dir);

/// Reads report.json and checks the schema version (FormatError on mismatch).
nlohmann::json load_report(const std::filesystem::path& path);

/// Maps a library exception to the CLI exit code.
int exit_code_for(const std::exception& e);

} // namespace ehom::app
