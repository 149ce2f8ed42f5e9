#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ehom/environment.hpp"
#include "ehom/grid.hpp"

namespace ehom {

/// Discrete Dirichlet form on the periodic grid graph. The edge from cell x
/// to x + e_i carries the harmonic mean of the two cells' a_ii, and
///
///   E(u, v) = h^(d-2) sum_edges a_e (u(x+e) - u(x)) (v(x+e) - v(x)).
///
/// Off-diagonal cell entries do not enter the 2d-neighbour stencil.
class DirichletForm {
public:
  explicit DirichletForm(const CoefficientField& field);

  const Grid& grid() const noexcept { return grid_; }
  int dim() const noexcept { return grid_.dim(); }
  double spacing() const noexcept { return spacing_; }
  double volume() const;
  std::size_t num_cells() const noexcept { return grid_.size(); }

  /// Conductance of the edge from `cell` to its + neighbour along `axis`.
  double conductance(std::size_t cell, int axis) const noexcept {
    return conductance_[cell * static_cast<std::size_t>(grid_.dim()) + static_cast<std::size_t>(axis)];
  }
  std::span<const double> conductances() const noexcept { return conductance_; }
  double min_conductance() const noexcept { return min_conductance_; }

  bool degenerate() const noexcept { return degenerate_; }
  std::uint64_t field_hash() const noexcept { return field_hash_; }

  /// y = A x with (A x)(c) = sum over the 2d incident edges of a_e (x(c) - x(nbr)).
  /// Lattice units: the h^(d-2) prefactor of E is not applied.
  void apply_laplacian(std::span<const double> x, std::span<double> y) const;
  /// Diagonal of A: total conductance at each cell.
  std::vector<double> diagonal() const;

private:
  Grid grid_;
  double spacing_;
  std::vector<double> conductance_;
  double min_conductance_ = 0.0;
  bool degenerate_ = false;
  std::uint64_t field_hash_ = 0;
};

DirichletForm assemble(const CoefficientField& field);

/// u(x) = <slope, x> + values(x): an affine part plus a periodic cell part.
/// Either member may be empty, meaning zero.
struct CellFunction {
  std::vector<double> slope;
  std::vector<double> values;

  static CellFunction periodic(std::vector<double> values) { return {{}, std::move(values)}; }
  static CellFunction coordinate(int dim, int axis);
};

/// Difference u(x + e_axis) - u(x) along one edge.
double edge_difference(const DirichletForm& form, const CellFunction& u, std::size_t cell, int axis);

double energy(const DirichletForm& form, const CellFunction& u, const CellFunction& v);

/// E_eta(u, v): edge terms weighted by the mean of eta^2 over the two cells.
double weighted_energy(const DirichletForm& form, std::span<const double> eta, const CellFunction& u,
                       const CellFunction& v);

// Norms. Un-normalised norms integrate with the cell volume h^d; ball norms
// are cell averages over the listed cells. An infinite exponent is the max.

double lp_norm(std::span<const double> values, std::span<const std::size_t> cells, double r,
               double cell_volume);
double weighted_lp_norm(std::span<const double> values, std::span<const double> weight,
                        std::span<const std::size_t> cells, double r, double cell_volume);
double ball_norm(std::span<const double> values, std::span<const std::size_t> cells, double r);

/// Piecewise-linear radial ramp: 1 within `inner`, 0 beyond `outer`.
std::vector<double> radial_cutoff(const Grid& grid, double h, std::span<const double> center,
                                  double inner, double outer);

/// max over edges of |eta(x+e) - eta(x)| / h.
double cutoff_gradient_sup(const DirichletForm& form, std::span<const double> eta);

/// ||u||_rho^2 / (||1_B lambda^-1||_q E(u, u)) for u supported in the ball.
double sobolev_ratio(const DirichletForm& form, const CoefficientField& field,
                     std::span<const double> u, const Ball& ball, double q);

/// ||u||_{rho/p*, Lambda}^2 / (||1_B lambda^-1||_q ||1_B Lambda||_p^(2p*/rho) E(u, u)).
double weighted_sobolev_ratio(const DirichletForm& form, const CoefficientField& field,
                              std::span<const double> u, const Ball& ball, double p, double q);

/// ||eta u||_rho^2 / (2 ||1_B lambda^-1||_q [E_eta(u,u) + |grad eta|_inf^2 ||1_B u||_{2,Lambda}^2]).
double cutoff_sobolev_ratio(const DirichletForm& form, const CoefficientField& field,
                            std::span<const double> u, std::span<const double> eta, const Ball& ball,
                            double q);

} // namespace ehom
