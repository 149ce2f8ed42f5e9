#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ehom/corrector.hpp"
#include "ehom/energy.hpp"
#include "ehom/field_io.hpp"
#include "ehom/homogenize.hpp"

namespace ehom {

/// Variable-speed conductance walk: from x, jump across edge e at rate a_e / h^2.
struct WalkConfig {
  std::vector<std::int64_t> start; ///< start cell; empty means the origin
  bool random_start = false;       ///< draw the start cell uniformly per path instead
  double t_max = 1.0;
  int paths = 1000;
  std::uint64_t seed = 0;
  /// Positions are recorded at k * record_stride for k >= 1 up to t_max
  /// (t_max itself always). Non-positive means t_max only.
  double record_stride = 0.0;
  int threads = 1;

  void validate() const;
  std::vector<double> sample_times() const;
};

/// Per-cell function whose time integral along the path is recorded.
struct Functional {
  std::string name;
  std::vector<double> values;
};

struct RecordSpec {
  std::vector<Functional> functionals;
  /// Time-change weight theta > 0 per cell. When set, the changed process is
  /// recorded at `clock_times` of the clock A_s = int_0^s theta(X_u) du.
  std::vector<double> theta;
  std::vector<double> clock_times;
  int trace_paths = 0; ///< paths with id below this keep a full trace
  bool occupation = false; ///< per-path time spent in each cell
};

struct PathSample {
  std::uint64_t path_id = 0;
  std::vector<std::int64_t> start;          ///< unwrapped start cell
  std::vector<std::int64_t> positions;      ///< [sample][axis], unwrapped
  std::vector<std::vector<double>> integrals; ///< [functional][sample]
  std::vector<std::int64_t> clock_positions;  ///< X at tau_t, [clock sample][axis]
  std::vector<double> clock_natural_times;    ///< tau_t per clock sample
  std::vector<double> occupation;
  std::optional<WalkTrace> trace;
  std::uint64_t jumps = 0;
};

struct WalkResult {
  Grid grid;
  double spacing = 1.0;
  std::uint64_t field_hash = 0;
  std::vector<double> sample_times;
  std::vector<double> clock_times;
  std::vector<std::string> functional_names;
  std::vector<PathSample> paths;

  int dim() const noexcept { return grid.dim(); }
  /// Physical displacement X_t - X_0 of one path at a sample index.
  std::vector<double> displacement(std::size_t path, std::size_t sample) const;
  std::size_t functional_index(const std::string& name) const;
};

/// Simulates independent paths; path i uses stream i of the master seed, so
/// results do not depend on the thread count. Throws SingularityError on
/// degenerate fields and RangeError when the horizon is out of reach.
WalkResult simulate_walk(const DirichletForm& form, const WalkConfig& config, const RecordSpec& record = {});

// ---------------------------------------------------------------------------

/// Densities f^{hk}(x) = sum_{e at x} (a_e / h^2) (Delta_e y^h)(Delta_e y^k) of
/// the predictable covariation of M = y(X_t) - y(X_0). Named "qv:h,k" for h <= k.
std::vector<Functional> quadratic_variation_densities(const DirichletForm& form,
                                                      const CorrectorField& correctors);

struct MartingaleReport {
  double time = 0.0;
  /// max over paths and samples of |X - y(X) - chi(X)|.
  double decomposition_error = 0.0;
  Eigen::MatrixXd qv_over_t;      ///< path mean of <M^h, M^k>_t / t at the last sample
  Eigen::MatrixXd martingale_cov; ///< empirical covariance of M_t / t
  bool qv_monotone = true;        ///< <M^k, M^k> nondecreasing along every path
  double increment_correlation = 0.0; ///< max |corr| of M increments over the two halves
};

/// Requires the walk to have recorded quadratic_variation_densities of the
/// same correctors; throws ConsistencyError on a field mismatch.
MartingaleReport martingale_decomposition(const WalkResult& walk, const CorrectorField& correctors);

struct KsRow {
  std::vector<double> xi;
  double statistic = 0.0;
  double p_value = 0.0;
  bool pass = false;
};

struct CltRow {
  double time = 0.0;
  Eigen::MatrixXd covariance_over_t;
  double relative_error = 0.0; ///< max_ij |C_ij - D_ij| / max_ij |D_ij|
  std::vector<KsRow> ks;
};

struct CltReport {
  Eigen::MatrixXd target;
  double ks_threshold = 0.01;
  std::vector<CltRow> rows;
  std::string note;

  std::string to_csv() const;
};

inline constexpr int kMinCltPaths = 1000;

/// Endpoint covariance and per-direction KS tests of xi.X_t / sqrt(t xi^T D xi).
/// Throws StatisticsError with fewer than kMinCltPaths paths.
CltReport clt_statistics(const WalkResult& walk, const Eigen::MatrixXd& D, std::span<const double> eval_times,
                         std::span<const std::vector<double>> directions, double ks_threshold = 0.01);

/// Trace-level time change: jump times are mapped through A_s = int_0^s theta(X_u) du.
WalkTrace time_change(const WalkTrace& trace, const Grid& grid, std::span<const double> theta);

struct TimeChangeReport {
  double time = 0.0;
  Eigen::MatrixXd covariance_over_t; ///< of the changed process at the last clock time
  double theta_mean = 0.0;
  /// (1/t) int_0^t theta^-1(Y_s) ds averaged over paths, i.e. tau_t / t.
  double conservativeness = 0.0;
  double conservativeness_target = 0.0; ///< 1 / avg(theta)
};

TimeChangeReport time_change_statistics(const WalkResult& walk, std::span<const double> theta);

struct EnvironmentAverage {
  double mean = 0.0;
  double standard_error = 0.0;
  double time = 0.0;
  bool horizon_ok = true; ///< t >= mixing_factor * mixing_time
};

/// Path average of (1/t) int_0^t g(X_s) ds at the last sample.
EnvironmentAverage environment_average(const WalkResult& walk, const std::string& functional,
                                       double mixing_time = 0.0, double mixing_factor = 100.0);

/// L^2 / (2 pi^2 min eig D): relaxation time of the homogenised walk on the box.
double mixing_time(const Eigen::MatrixXd& D, double box_side);

} // namespace ehom
