#pragma once

namespace ehom {

/// Hoelder conjugate p/(p-1); infinite for p = 1, one for p = infinity.
double holder_conjugate(double p);

/// Sobolev conjugate of 2q/(q+1): rho = 2qd / (q(d-2) + d).
double sobolev_rho(double q, int d);

/// True iff 1/p + 1/q < 2/d.
bool moments_admissible(double p, double q, int d);

/// Exponent bookkeeping of the Moser iteration for solutions of the Poisson
/// problem, plus the norm-index improvement to an arbitrary L^alpha norm.
struct MoserSchedule {
  double p = 0.0;
  double q = 0.0;
  int d = 0;
  double alpha = 0.0; ///< norm index of the improved inequality
  int truncation = 0; ///< K

  double p_star = 0.0;
  double rho = 0.0;
  double ratio = 0.0; ///< rho / (2 p*) > 1

  double kappa = 0.0;            ///< (1/2) sum_k 1/alpha_k, closed form
  double kappa_partial = 0.0;    ///< first K terms
  double kappa_tail_bound = 0.0; ///< kappa - kappa_partial
  double gamma = 0.0;            ///< prod_k (1 - 1/alpha_k), first K factors
  double gamma_tail_bound = 0.0; ///< relative error bound of the truncated product

  double theta = 0.0;             ///< alpha / rho (clamped to 1 when alpha >= rho)
  double kappa_prime = 0.0;       ///< kappa * sum_k k (1 - theta)^(k-1), closed form
  double kappa_prime_partial = 0.0;
  double kappa_prime_tail_bound = 0.0;
  double gamma_prime = 0.0; ///< gamma theta / (1 - gamma + gamma theta)

  /// alpha_k = (rho / 2p*)^k, k >= 1.
  double alpha_k(int k) const;
  /// sigma_k = sigma' + 2^(1-k) (sigma - sigma').
  static double sigma_k(int k, double sigma, double sigma_prime);
};

/// Throws ConfigError when (p, q, d) violates 1/p + 1/q < 2/d, when d < 2,
/// when alpha <= 0 or K < 16, or when rho is unbounded (d = 2, q = infinity).
MoserSchedule moser_exponents(double p, double q, int d, double alpha, int truncation = 64);

} // namespace ehom
