#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ehom/grid.hpp"

namespace ehom {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace model {

struct Identity {};

struct ScaledIdentity {
  double c = 1.0;
};

/// Two layers stacked along axis 0; the first `volume_fraction` of the box
/// holds `a_low`.
struct Laminate {
  double a_low = 1.0;
  double a_high = 4.0;
  double volume_fraction = 0.5;
};

/// Square tiles of `tile_cells` cells alternating between the two values.
/// The tile whose index sum is even holds `a_low`.
struct Checkerboard {
  double a_low = 1.0;
  double a_high = 4.0;
  int tile_cells = 1;
};

/// Axis-aligned cells with Pareto-type eigenvalues drawn per block of
/// `correlation_cells`^d cells: lambda = u^(1/lo), Lambda = lambda v v^(-1/hi).
struct HeavyTail {
  double tail_index_lo = 3.0;
  double tail_index_hi = 3.0;
  int correlation_cells = 1;
};

/// Degenerate medium a = phi^-1 I with phi = max(|x - c|, h)^-exponent in the
/// unit ball around the box centre. Only used by negative tests.
struct BesselTrap {
  double exponent = 2.0;
};

} // namespace model

using Model = std::variant<model::Identity, model::ScaledIdentity, model::Laminate,
                           model::Checkerboard, model::HeavyTail, model::BesselTrap>;

struct EnvironmentSpec {
  Model model = model::Identity{};
  int dimension = 2;
  std::uint64_t seed = 0;

  /// Throws ConfigError on invalid parameter ranges.
  void validate() const;
  std::string model_name() const;
};

/// Piecewise-constant field of symmetric d x d matrices on a periodic grid.
/// Immutable after construction.
class CoefficientField {
public:
  /// Computes per-cell eigen-bounds from the packed upper-triangular entries.
  CoefficientField(Grid grid, double spacing, std::vector<double> entries, bool degenerate = false);
  /// Takes precomputed eigen-bounds (e.g. when reading from disk).
  CoefficientField(Grid grid, double spacing, std::vector<double> entries, std::vector<double> lambda,
                   std::vector<double> Lambda, bool degenerate = false);

  static int packed_size(int d) noexcept { return d * (d + 1) / 2; }
  static int packed_index(int d, int i, int j) noexcept;

  const Grid& grid() const noexcept { return grid_; }
  int dim() const noexcept { return grid_.dim(); }
  int cells_per_side() const noexcept { return grid_.n(); }
  std::size_t num_cells() const noexcept { return grid_.size(); }
  double spacing() const noexcept { return spacing_; }
  double box_side() const noexcept { return spacing_ * grid_.n(); }
  double volume() const;

  std::span<const double> entries() const noexcept { return entries_; }
  std::span<const double> matrix(std::size_t cell) const noexcept {
    const auto m = static_cast<std::size_t>(packed_size(dim()));
    return std::span<const double>(entries_).subspan(cell * m, m);
  }
  double entry(std::size_t cell, int i, int j) const noexcept;
  double diagonal(std::size_t cell, int axis) const noexcept { return entry(cell, axis, axis); }

  std::span<const double> lambda() const noexcept { return lambda_; }
  std::span<const double> Lambda() const noexcept { return Lambda_; }

  /// <a(x) xi, xi> for the cell matrix.
  double quadratic_form(std::size_t cell, std::span<const double> xi) const;

  /// True for the trap preset; such fields are refused by the solvers and the walk.
  bool degenerate() const noexcept { return degenerate_; }

  /// Content hash over grid, spacing and entries.
  std::uint64_t hash() const noexcept { return hash_; }

  bool operator==(const CoefficientField& other) const;

private:
  void finish();

  Grid grid_;
  double spacing_;
  std::vector<double> entries_;
  std::vector<double> lambda_;
  std::vector<double> Lambda_;
  bool degenerate_ = false;
  std::uint64_t hash_ = 0;
};

/// Realises the spec on an n^d torus of spacing h. `origin` offsets the
/// absolute lattice coordinate that the random blocks and tiles are keyed
/// on, so boxes of different sizes sample the same underlying medium.
CoefficientField generate_field(const EnvironmentSpec& spec, int cells_per_side, double spacing,
                                std::int64_t origin = 0);

struct MomentReport {
  double p = 1.0;
  double q = 1.0;
  double emp_lambda_inv_q = 0.0;
  double emp_Lambda_p = 0.0;
  double condition_value = 0.0;
  double threshold = 0.0;
  bool admissible = false;
};

/// Cell averages of lambda^-q and Lambda^p; infinite exponents mean the
/// maximum over cells. Divergence is reported, never thrown.
MomentReport validate_moments(const CoefficientField& field, double p, double q);

/// Growth of empirical moments under refinement of the unit box (h = 1/n).
struct MomentSweep {
  double p = 1.0;
  double q = 1.0;
  std::vector<int> sizes;
  std::vector<double> lambda_inv_q; ///< median over seeds, per size
  std::vector<double> Lambda_p;
  double lambda_growth_slope = 0.0; ///< d log(moment) / d log(n)
  double Lambda_growth_slope = 0.0;
  bool diverging = false;
  bool admissible = false;
};

inline constexpr double kDivergenceSlope = 0.1;

MomentSweep moment_sweep(const EnvironmentSpec& spec, double p, double q, std::span<const int> sizes,
                         int seeds = 1);

struct DoublingRow {
  double radius = 0.0;
  double ratio_Lambda = 0.0;
  double muckenhaupt_ratio = 0.0;
};

/// Volume-doubling and Muckenhaupt-type ratios on balls around a cell centre.
std::vector<DoublingRow> doubling_diagnostic(const CoefficientField& field, std::size_t center_cell,
                                             std::span<const double> radii);

/// Returned field's cell x equals the input's cell x + offset (mod n).
CoefficientField translate(const CoefficientField& field, std::span<const std::int64_t> offset);

} // namespace ehom
