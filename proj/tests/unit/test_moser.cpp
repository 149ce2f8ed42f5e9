#include <cmath>

#include <gtest/gtest.h>

#include "ehom/corrector.hpp"
#include "ehom/errors.hpp"
#include "ehom/homogenize.hpp"
#include "ehom/moser.hpp"
#include "ehom/statistics.hpp"

using namespace ehom;

TEST(Moser, Conjugates) {
  EXPECT_EQ(holder_conjugate(3.0), 1.5);
  EXPECT_EQ(holder_conjugate(kInf), 1.0);
  EXPECT_TRUE(std::isinf(holder_conjugate(1.0)));
  EXPECT_EQ(sobolev_rho(2.0, 2), 4.0);
  EXPECT_DOUBLE_EQ(sobolev_rho(kInf, 3), 6.0);
}

// rho / 2p* = 4/3 and kappa = (1/2) sum (3/4)^k = 3/2.
TEST(Moser, ScheduleClosedForms) {
  const auto s = moser_exponents(3.0, 2.0, 2, 3.0);
  EXPECT_EQ(s.rho, 4.0);
  EXPECT_EQ(s.p_star, 1.5);
  EXPECT_DOUBLE_EQ(s.ratio, 4.0 / 3.0);
  EXPECT_EQ(s.kappa, 1.5);
  EXPECT_NEAR(s.kappa_partial + s.kappa_tail_bound, s.kappa, 1e-12);
  EXPECT_DOUBLE_EQ(s.alpha_k(2), 16.0 / 9.0);
  EXPECT_GT(s.gamma, 0.0);
  EXPECT_LT(s.gamma, 1.0);
  EXPECT_DOUBLE_EQ(s.theta, 0.75);
  // sum_k k x^(k-1) = 1 / (1 - x)^2 with x = 1 - theta.
  EXPECT_NEAR(s.kappa_prime, 1.5 / (0.75 * 0.75), 1e-12);
  EXPECT_NEAR(s.gamma_prime, s.gamma * 0.75 / (1.0 - s.gamma + s.gamma * 0.75), 1e-15);
  EXPECT_EQ(MoserSchedule::sigma_k(1, 1.0, 0.5), 1.0);
  EXPECT_EQ(MoserSchedule::sigma_k(3, 1.0, 0.5), 0.625);
}

TEST(Moser, RejectsInadmissible) {
  EXPECT_THROW(moser_exponents(2.0, 2.0, 2, 2.0), ConfigError);
  EXPECT_THROW(moser_exponents(kInf, kInf, 2, 2.0), ConfigError);
  EXPECT_THROW(moser_exponents(3.0, 3.0, 1, 2.0), ConfigError);
  EXPECT_THROW(moser_exponents(3.0, 3.0, 2, -1.0), ConfigError);
  EXPECT_THROW(moser_exponents(3.0, 3.0, 2, 2.0, 4), ConfigError);
}

TEST(Moser, PrefactorClampsAtOne) {
  EXPECT_DOUBLE_EQ(moser_prefactor(0.5, 0.5, 1.0, 2.0), 16.0);
  EXPECT_DOUBLE_EQ(moser_prefactor(2.0, 0.5, 1.0, 1.0), 8.0);
}

TEST(Moser, AuditRatiosFiniteOnCheckerboard) {
  EnvironmentSpec spec;
  spec.model = model::Checkerboard{1.0, 4.0, 2};
  const auto sched = moser_exponents(3.0, 3.0, 2, 3.0);
  const int sizes[] = {16, 32, 64};
  const auto rep = moser_audit(spec, sched, 0.25, 0.5, 1.0, sizes, 0, 1e-10, 5000);
  ASSERT_EQ(rep.rows.size(), 3u);
  for (const auto& r : rep.rows) {
    EXPECT_TRUE(std::isfinite(r.ratio));
    EXPECT_GT(r.ratio, 0.0);
    EXPECT_LE(r.lhs, r.alpha_norm * 1e6);
  }
  ASSERT_TRUE(rep.spread().has_value());
  EXPECT_GE(*rep.spread(), 1.0);
  EXPECT_EQ(rep.to_csv().substr(0, 27), "epsilon,lhs,rhs_core,ratio\n");
}

TEST(Moser, DirectMaximalInequality) {
  EnvironmentSpec spec;
  spec.model = model::HeavyTail{3.0, 3.0, 1};
  const auto f = generate_field(spec, 32, 1.0 / 32);
  const DirichletForm form(f);
  const auto sched = moser_exponents(2.5, 2.5, 2, 3.0);
  const double slope[] = {1.0, 0.0};
  const Ball ball{box_center(f.grid(), f.spacing()), 0.25};
  const auto r = maximal_inequality_direct(form, f, slope, ball, sched);
  EXPECT_GT(r.lhs, 0.0);
  EXPECT_TRUE(std::isfinite(r.ratio));
  EXPECT_GT(r.ratio, 0.0);
  EXPECT_THROW(maximal_inequality_direct(form, f, slope, ball, sched, 0.4, 1.0), ConfigError);
}

TEST(Statistics, NormalAndKolmogorov) {
  EXPECT_NEAR(standard_normal_cdf(1.959963984540054), 0.975, 1e-12);
  EXPECT_NEAR(kolmogorov_tail(1.3581), 0.05, 1e-3);
  EXPECT_NEAR(kolmogorov_tail(1.6276), 0.01, 2e-4);
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  const double x[] = {1, 2, 3, 4}, y[] = {3, 5, 7, 9};
  EXPECT_DOUBLE_EQ(least_squares_slope(x, y), 2.0);
  EXPECT_DOUBLE_EQ(sample_variance(x), 5.0 / 3.0);
}

TEST(Statistics, KsDetectsShift) {
  std::vector<double> even, shifted;
  for (int i = 0; i < 2000; ++i) {
    const double u = (i + 0.5) / 2000.0;
    // Inverse CDF by bisection on the library cdf.
    double lo = -10, hi = 10;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (standard_normal_cdf(mid) < u ? lo : hi) = mid;
    }
    even.push_back(lo);
    shifted.push_back(lo + 0.3);
  }
  EXPECT_GT(ks_test_standard_normal(even).p_value, 0.99);
  EXPECT_LT(ks_test_standard_normal(shifted).p_value, 1e-6);
}
