#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ehom/corrector.hpp"
#include "ehom/energy.hpp"
#include "ehom/environment.hpp"
#include "ehom/moser.hpp"

namespace ehom {

/// d_ij = 2 E(y^i, y^j) / volume, symmetrised.
struct EffectiveMatrix {
  Eigen::MatrixXd D;
  /// Bound on |d_ij - d_ij(exact)| from the corrector residuals:
  /// 2 ||r_i|| ||r_j|| / (lambda_2 n^d), lambda_2 >= a_min 4 sin^2(pi/n).
  Eigen::MatrixXd error_bar;
  double asymmetry = 0.0; ///< max |d_ij - d_ji| before symmetrisation
  Eigen::VectorXd eigenvalues;
  std::uint64_t field_hash = 0;

  int dim() const noexcept { return static_cast<int>(D.rows()); }
  double quadratic_form(std::span<const double> xi) const;
};

/// Throws NotPositiveDefinite carrying the eigenvalues if D is not SPD.
EffectiveMatrix effective_matrix(const DirichletForm& form, const CorrectorField& correctors);

struct BoundsRow {
  std::vector<double> xi;
  double value = 0.0; ///< xi^T D xi
  double lower = 0.0; ///< 2 |xi|^2 / avg(lambda^-1)
  double upper = 0.0; ///< 2 avg <a xi, xi>
  bool lower_ok = false;
  bool upper_ok = false;
  bool lower_tight = false;
  bool upper_tight = false;
};

struct BoundsReport {
  std::vector<BoundsRow> rows;
  double slack = 0.0;
  bool all_ok = true;
};

inline constexpr double kBoundsSlack = 1e-9;
inline constexpr double kTightTolerance = 1e-6;

BoundsReport check_bounds(const EffectiveMatrix& D, const CoefficientField& field,
                          std::span<const std::vector<double>> directions, double slack = kBoundsSlack,
                          double tight_tolerance = kTightTolerance);

/// Unit coordinate directions followed by `random_count` uniform directions on the sphere.
std::vector<std::vector<double>> test_directions(int dim, int random_count, std::uint64_t seed);

struct MoserAuditRow {
  double epsilon = 0.0;
  double lhs = 0.0;           ///< ||chi||_{B(sigma' R), inf}
  double moment_factor = 0.0; ///< ||lambda^-1||_{B(R), q} ||Lambda||_{B(R), p}
  double alpha_norm = 0.0;    ///< ||chi||_{B(sigma R), alpha}
  double rhs_core = 0.0;
  double ratio = 0.0;
};

struct MoserAuditReport {
  double radius = 0.0;
  double sigma_prime = 0.0;
  double sigma = 0.0;
  int component = 0;
  std::vector<MoserAuditRow> rows;
  double max_ratio = 0.0; ///< empirical envelope of the unknown constant
  double min_ratio = 0.0;

  /// max/min ratio over the sweep; empty when some ratio is zero.
  std::optional<double> spread() const;
  std::string to_csv() const;
};

/// ((1 v X) / (sigma - sigma')^2)^exponent.
double moser_prefactor(double moment_factor, double sigma_prime, double sigma, double exponent);

/// Audits the improved maximal inequality on the correctors chi^component of
/// the spec realised at each size (unit box, ball around the box centre).
MoserAuditReport moser_audit(const EnvironmentSpec& spec, const MoserSchedule& schedule, double radius,
                             double sigma_prime, double sigma, std::span<const int> sizes,
                             int component = 0, double tol = 1e-10, int max_iter = 20000);

/// Same audit on precomputed solutions.
MoserAuditRow moser_audit_row(const ScaleSolution& solution, const MoserSchedule& schedule, double radius,
                              double sigma_prime, double sigma, int component);

struct MaximalInequality {
  double lhs = 0.0;
  double rhs_core = 0.0;
  double ratio = 0.0;
  std::vector<double> u; ///< Dirichlet solution, zero outside the ball
  SolveStats stats;
};

/// Solves E(u, phi) = E(f, phi) for phi supported in the ball with u = 0
/// outside, f = <f_slope, x>, and evaluates both sides of the maximal
/// inequality with the rho-norm on the right.
MaximalInequality maximal_inequality_direct(const DirichletForm& form, const CoefficientField& field,
                                            std::span<const double> f_slope, const Ball& ball,
                                            const MoserSchedule& schedule, double sigma_prime = 0.5,
                                            double sigma = 1.0, double tol = 1e-10, int max_iter = 20000);

} // namespace ehom
