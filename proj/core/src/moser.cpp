#include "ehom/moser.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ehom/errors.hpp"

namespace ehom {

namespace {
constexpr double kInfinity = std::numeric_limits<double>::infinity();
}

double holder_conjugate(double p) {
  if (std::isinf(p)) {
    return 1.0;
  }
  if (p == 1.0) {
    return kInfinity;
  }
  return p / (p - 1.0);
}

double sobolev_rho(double q, int d) {
  if (d < 2) {
    throw ConfigError("the Sobolev exponent rho needs d >= 2");
  }
  if (std::isinf(q)) {
    return d == 2 ? kInfinity : 2.0 * d / (d - 2.0);
  }
  return 2.0 * q * d / (q * (d - 2.0) + d);
}

bool moments_admissible(double p, double q, int d) {
  const double lhs = (std::isinf(p) ? 0.0 : 1.0 / p) + (std::isinf(q) ? 0.0 : 1.0 / q);
  return lhs < 2.0 / d;
}

double MoserSchedule::alpha_k(int k) const { return std::pow(ratio, k); }

double MoserSchedule::sigma_k(int k, double sigma, double sigma_prime) {
  return sigma_prime + std::ldexp(sigma - sigma_prime, 1 - k);
}

MoserSchedule moser_exponents(double p, double q, int d, double alpha, int truncation) {
  if (d < 2) {
    throw ConfigError("Moser schedule requires d >= 2");
  }
  if (!(p >= 1.0) || !(q >= 1.0)) {
    throw ConfigError("Moser schedule requires p, q >= 1");
  }
  if (!moments_admissible(p, q, d)) {
    std::ostringstream os;
    os << "inadmissible exponents: 1/p + 1/q = "
       << (std::isinf(p) ? 0.0 : 1.0 / p) + (std::isinf(q) ? 0.0 : 1.0 / q)
       << " is not < 2/d = " << 2.0 / d << " (p=" << p << ", q=" << q << ", d=" << d << ")";
    throw ConfigError(os.str());
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("Moser schedule requires a finite norm index alpha > 0");
  }
  if (truncation < 16) {
    throw ConfigError("Moser schedule truncation K must be >= 16");
  }

  MoserSchedule s;
  s.p = p;
  s.q = q;
  s.d = d;
  s.alpha = alpha;
  s.truncation = truncation;
  s.p_star = holder_conjugate(p);
  s.rho = sobolev_rho(q, d);
  if (std::isinf(s.rho)) {
    throw ConfigError("rho is unbounded for d = 2 and q = infinity; pick a finite q");
  }
  s.ratio = s.rho / (2.0 * s.p_star);
  if (!(s.ratio > 1.0)) {
    throw ConfigError("rho must exceed 2 p* for admissible exponents");
  }

  const double r = s.ratio;
  const int K = truncation;
  // (1/2) / (r - 1) written without the rounded ratio.
  s.kappa = s.p_star / (s.rho - 2.0 * s.p_star);
  double partial = 0.0;
  double product = 1.0;
  for (int k = 1; k <= K; ++k) {
    const double inv_alpha = std::pow(r, -k);
    partial += inv_alpha;
    product *= 1.0 - inv_alpha;
  }
  s.kappa_partial = 0.5 * partial;
  s.kappa_tail_bound = s.kappa * std::pow(r, -K);
  s.gamma = product;
  // log prod_{k>K} (1 - r^-k) >= -sum_{k>K} r^-k / (1 - r^-k).
  const double log_tail = std::pow(r, -K) / ((r - 1.0) * (1.0 - std::pow(r, -(K + 1))));
  s.gamma_tail_bound = -std::expm1(-log_tail);

  s.theta = std::min(1.0, alpha / s.rho);
  const double x = 1.0 - s.theta;
  s.kappa_prime = s.kappa / (s.theta * s.theta);
  double series = 0.0;
  for (int k = 1; k <= K; ++k) {
    series += k * std::pow(x, k - 1);
  }
  s.kappa_prime_partial = s.kappa * series;
  s.kappa_prime_tail_bound =
      x == 0.0 ? 0.0 : s.kappa * std::pow(x, K) * (K + 1.0 - K * x) / ((1.0 - x) * (1.0 - x));
  s.gamma_prime = s.gamma * s.theta / (1.0 - s.gamma + s.gamma * s.theta);
  return s;
}

} // namespace ehom
