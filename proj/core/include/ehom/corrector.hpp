#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ehom/energy.hpp"
#include "ehom/environment.hpp"
#include "ehom/field_io.hpp"
#include "ehom/solver.hpp"

namespace ehom {

/// Mean-zero periodic correctors chi^k in physical units. In lattice units
/// the cell problem reads A chi_hat = b with b(x) = a_{x-e_k,k} - a_{x,k},
/// and chi = h chi_hat.
struct CorrectorField {
  int dim = 0;
  Grid grid;
  double spacing = 1.0;
  std::uint64_t field_hash = 0;
  double tolerance = 0.0;
  std::vector<std::vector<double>> chi;
  std::vector<double> means;
  std::vector<SolveStats> stats;
  std::vector<double> rhs_norms; ///< ||b||_2 of each lattice system

  /// U_axis^k on the edge from `cell` to its + neighbour: difference of chi^k over h.
  double gradient(int k, std::size_t cell, int axis) const;
};

/// Solves the d cell problems with preconditioned CG. Throws
/// SingularityError for degenerate forms, NonConvergenceError past max_iter.
CorrectorField solve_correctors(const DirichletForm& form, double tol, int max_iter,
                                Preconditioner preconditioner = Preconditioner::multigrid);

/// y^k = pi^k - chi^k, with pi^k(x) = h x_k on lattice coordinates.
struct HarmonicCoordinates {
  int dim = 0;
  Grid grid;
  double spacing = 1.0;
  std::uint64_t field_hash = 0;
  std::vector<CellFunction> y;
  /// max_c |E(y^k, 1_c)| relative to the l2 norm of (E(pi^k, 1_c))_c, per k.
  std::vector<double> harmonicity_residual;

  /// y^k at an unwrapped lattice position.
  double value(int k, std::span<const std::int64_t> position, const CorrectorField& chi) const;
};

/// Forms y^k and checks the harmonicity residual against 10 tol; throws
/// ConsistencyError if the residual check fails.
HarmonicCoordinates harmonic_coordinates(const DirichletForm& form, const CorrectorField& correctors);

struct CorrectorDiagnostics {
  std::vector<double> chi_mean;                   ///< |mean chi^k|
  std::vector<std::vector<double>> gradient_mean; ///< |mean over edges of U_i^k|, [k][i]
  std::vector<double> energy_per_volume;          ///< E(y^k, y^k) / volume
};

CorrectorDiagnostics mean_zero_and_energy_checks(const CorrectorField& correctors,
                                                 const DirichletForm& form);

/// Correctors of the spec realised on the unit box with h = 1/n. Boxes of
/// every size are centred on the same absolute lattice origin, so growing n
/// reveals more of one fixed medium.
struct ScaleSolution {
  int cells_per_side = 0;
  CoefficientField field;
  CorrectorField correctors;
};

ScaleSolution solve_scale(const EnvironmentSpec& spec, int cells_per_side, double tol, int max_iter);

struct SublinearityRow {
  double epsilon = 0.0;
  double sup_norm = 0.0;
  std::uint64_t seed = 0;
};

struct SublinearityCurve {
  double radius = 0.0;
  std::vector<SublinearityRow> rows;   ///< one per (size, seed)
  std::vector<double> epsilons;        ///< strictly decreasing
  std::vector<double> mean_sup_norms;  ///< seed average per epsilon
  std::optional<double> slope;         ///< d log(sup) / d log(1/epsilon); empty if any mean is zero
  int decreasing_pairs = 0;

  std::string to_csv() const;
};

/// sup over cells of the ball B(radius) around the box centre of max_k |chi^k|,
/// on the unit box with epsilon = h = 1/n. Requires radius <= 1/4.
SublinearityCurve sublinearity_scan(const EnvironmentSpec& spec, double radius, std::span<const int> sizes,
                                    int seeds = 1, double tol = 1e-10, int max_iter = 20000);

/// sup norm of max_k |chi^k| over the cells of a ball.
double corrector_sup_norm(const CorrectorField& correctors, const Ball& ball);

ScalarFields to_scalar_fields(const CorrectorField& correctors);

} // namespace ehom
