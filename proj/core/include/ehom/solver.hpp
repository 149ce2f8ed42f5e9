#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "ehom/energy.hpp"

namespace ehom {

/// y = A x. Operators are only ever touched through matrix-vector products.
using LinearMap = std::function<void(std::span<const double>, std::span<double>)>;

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0; ///< true ||b - A x|| / ||b|| at exit (0 when b = 0)
  double residual_norm = 0.0;     ///< true ||b - A x||_2 at exit
  std::vector<double> residual_history; ///< recurrence residual / ||b|| per iteration
  bool converged = false;
};

struct CgOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  /// Keep iterates orthogonal to constants (singular periodic problems).
  bool project_mean = false;
};

/// Preconditioned conjugate gradients. `precondition` may be empty. Throws
/// NonConvergenceError carrying the last residual when max_iter is exceeded.
SolveStats conjugate_gradient(const LinearMap& apply, const LinearMap& precondition,
                              std::span<const double> b, std::span<double> x, const CgOptions& opts);

enum class Preconditioner { none, jacobi, multigrid };

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 20000;
  Preconditioner preconditioner = Preconditioner::multigrid;
};

/// Aggregation multigrid V-cycle for the periodic conductance Laplacian.
/// Cells are merged in 2^d blocks while the side stays even; the coarse
/// operator P^T A P is again a conductance Laplacian with summed face
/// conductances. Forward Gauss-Seidel before and backward after the coarse
/// correction keep the cycle symmetric, so it can precondition CG.
class AggregationMultigrid {
public:
  explicit AggregationMultigrid(const DirichletForm& form, int sweeps = 2);
  ~AggregationMultigrid();
  AggregationMultigrid(AggregationMultigrid&&) noexcept;
  AggregationMultigrid& operator=(AggregationMultigrid&&) noexcept;

  /// z = B r for the symmetric V-cycle operator B. Not reentrant.
  void apply(std::span<const double> r, std::span<double> z) const;
  int levels() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Solves A x = b on the periodic grid for mean-zero b, returning the
/// mean-zero solution. Refuses degenerate forms.
class PeriodicSolver {
public:
  PeriodicSolver(const DirichletForm& form, SolverOptions options);

  SolveStats solve(std::span<const double> b, std::span<double> x) const;
  const SolverOptions& options() const noexcept { return options_; }

private:
  const DirichletForm* form_;
  SolverOptions options_;
  std::vector<double> inv_diag_;
  std::shared_ptr<AggregationMultigrid> multigrid_;
};

} // namespace ehom
