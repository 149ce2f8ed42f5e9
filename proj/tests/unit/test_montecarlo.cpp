#include <cmath>

#include <gtest/gtest.h>

#include "ehom/corrector.hpp"
#include "ehom/errors.hpp"
#include "ehom/homogenize.hpp"
#include "ehom/montecarlo.hpp"

using namespace ehom;

namespace {

CoefficientField field_of(Model m, int n, std::uint64_t seed = 5) {
  EnvironmentSpec s;
  s.model = m;
  s.seed = seed;
  return generate_field(s, n, 1.0 / n);
}

} // namespace

TEST(Walk, DeterministicAcrossThreadCounts) {
  const auto f = field_of(model::HeavyTail{3.0, 3.0, 1}, 16);
  const DirichletForm form(f);
  WalkConfig c;
  c.paths = 40;
  c.t_max = 0.5;
  c.record_stride = 0.1;
  c.seed = 99;
  RecordSpec r;
  r.trace_paths = 3;
  const auto a = simulate_walk(form, c, r);
  c.threads = 3;
  const auto b = simulate_walk(form, c, r);
  ASSERT_EQ(a.paths.size(), b.paths.size());
  for (std::size_t p = 0; p < a.paths.size(); ++p) {
    EXPECT_EQ(a.paths[p].positions, b.paths[p].positions);
    EXPECT_EQ(a.paths[p].jumps, b.paths[p].jumps);
  }
  EXPECT_TRUE(a.paths[2].trace.has_value());
  EXPECT_FALSE(a.paths[3].trace.has_value());
  EXPECT_EQ(a.paths[2].trace->times, b.paths[2].trace->times);
}

TEST(Walk, SampleTimesIncludeHorizon) {
  WalkConfig c;
  c.t_max = 1.0;
  c.record_stride = 0.3;
  const auto t = c.sample_times();
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t.back(), 1.0);
  c.record_stride = 0.0;
  EXPECT_EQ(c.sample_times().size(), 1u);
}

TEST(Walk, TrapRefused) {
  const auto f = field_of(model::BesselTrap{2.0}, 16);
  const DirichletForm form(f);
  WalkConfig c;
  c.paths = 1;
  EXPECT_THROW(simulate_walk(form, c), SingularityError);
}

TEST(Walk, InvalidConfigRejected) {
  const auto f = field_of(model::Identity{}, 4);
  const DirichletForm form(f);
  WalkConfig c;
  c.t_max = -1.0;
  EXPECT_THROW(simulate_walk(form, c), ConfigError);
}

// Symmetric rates leave the uniform law invariant: from a uniform start
// the expected time in every cell is t / N^d.
TEST(Walk, OccupationIsUniform) {
  EnvironmentSpec s;
  s.model = model::HeavyTail{3.0, 3.0, 1};
  s.seed = 17;
  const auto f = generate_field(s, 4, 1.0);
  const DirichletForm form(f);
  WalkConfig c;
  c.paths = 4000;
  c.t_max = 2.0;
  c.random_start = true;
  c.seed = 5;
  RecordSpec r;
  r.occupation = true;
  const auto w = simulate_walk(form, c, r);
  for (std::size_t cell = 0; cell < f.num_cells(); ++cell) {
    std::vector<double> occ;
    for (const auto& p : w.paths) {
      occ.push_back(p.occupation[cell]);
    }
    double m = 0.0, v = 0.0;
    for (double x : occ) {
      m += x;
    }
    m /= static_cast<double>(occ.size());
    for (double x : occ) {
      v += (x - m) * (x - m);
    }
    const double se = std::sqrt(v / static_cast<double>(occ.size() - 1) / static_cast<double>(occ.size()));
    EXPECT_NEAR(m, 2.0 / 16.0, 3.0 * se) << "cell " << cell;
  }
}

TEST(Walk, DecompositionAndQuadraticVariation) {
  const auto f = field_of(model::Checkerboard{1.0, 4.0, 2}, 16);
  const DirichletForm form(f);
  const auto chi = solve_correctors(form, 1e-12, 5000);
  const auto D = effective_matrix(form, chi);
  WalkConfig c;
  c.paths = 2000;
  c.t_max = 1.0;
  c.record_stride = 0.25;
  RecordSpec r;
  r.functionals = quadratic_variation_densities(form, chi);
  const auto w = simulate_walk(form, c, r);
  const auto m = martingale_decomposition(w, chi);
  EXPECT_LT(m.decomposition_error, 1e-12);
  EXPECT_TRUE(m.qv_monotone);
  EXPECT_NEAR(m.qv_over_t(0, 0), D.D(0, 0), 0.05 * D.D(0, 0));
}

// Cell averages of the carre du champ densities equal d_hk.
TEST(Walk, QuadraticVariationDensityAverages) {
  const auto f = field_of(model::HeavyTail{3.0, 3.0, 1}, 16);
  const DirichletForm form(f);
  const auto chi = solve_correctors(form, 1e-12, 5000);
  const auto D = effective_matrix(form, chi);
  const auto dens = quadratic_variation_densities(form, chi);
  ASSERT_EQ(dens.size(), 3u);
  EXPECT_EQ(dens[1].name, "qv:1,2");
  double s = 0.0;
  for (double v : dens[1].values) {
    s += v;
  }
  EXPECT_NEAR(s / static_cast<double>(f.num_cells()), D.D(0, 1), 1e-10);
}

TEST(Walk, ConstantClockOfOneIsIdentity) {
  const auto f = field_of(model::HeavyTail{3.0, 3.0, 1}, 16);
  const DirichletForm form(f);
  WalkConfig c;
  c.paths = 50;
  c.t_max = 1.0;
  c.record_stride = 0.25;
  RecordSpec r;
  r.theta.assign(f.num_cells(), 1.0);
  r.clock_times = c.sample_times();
  const auto w = simulate_walk(form, c, r);
  for (const auto& p : w.paths) {
    EXPECT_EQ(p.clock_positions, p.positions);
  }
}

// theta = 2 runs the clock twice as fast: Y_t = X_{t/2} exactly.
TEST(Walk, ConstantClockOfTwoHalvesTime) {
  const auto f = field_of(model::Checkerboard{1.0, 4.0, 1}, 16);
  const DirichletForm form(f);
  WalkConfig c;
  c.paths = 50;
  c.t_max = 1.0;
  c.record_stride = 0.25;
  RecordSpec r;
  r.theta.assign(f.num_cells(), 2.0);
  r.clock_times = {0.5, 1.0};
  const auto w = simulate_walk(form, c, r);
  const std::size_t d = 2;
  for (const auto& p : w.paths) {
    for (std::size_t a = 0; a < d; ++a) {
      EXPECT_EQ(p.clock_positions[a], p.positions[a]);
      EXPECT_EQ(p.clock_positions[d + a], p.positions[d + a]);
    }
    EXPECT_EQ(p.clock_natural_times[1], 0.5);
  }
  const auto tc = time_change_statistics(w, r.theta);
  EXPECT_DOUBLE_EQ(tc.conservativeness, 0.5);
}

TEST(Walk, TraceTimeChange) {
  const Grid g(1, 4);
  WalkTrace t{1, 0, {0.0, 1.0, 3.0}, {0, 1, 2}};
  const std::vector<double> theta = {2.0, 0.5, 1.0, 1.0};
  const auto tc = time_change(t, g, theta);
  EXPECT_EQ(tc.times, (std::vector<double>{0.0, 2.0, 3.0}));
  EXPECT_EQ(tc.cells, t.cells);
}

TEST(Walk, CltNeedsEnoughPaths) {
  const auto f = field_of(model::Identity{}, 8);
  const DirichletForm form(f);
  WalkConfig c;
  c.paths = 10;
  const auto w = simulate_walk(form, c);
  const std::vector<std::vector<double>> dirs = {{1.0, 0.0}};
  const double t[] = {1.0};
  EXPECT_THROW(clt_statistics(w, 2.0 * Eigen::MatrixXd::Identity(2, 2), t, dirs), StatisticsError);
}

TEST(Walk, MixingTimeProxy) {
  const Eigen::MatrixXd D = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  EXPECT_NEAR(mixing_time(D, 1.0), 1.0 / (4.0 * M_PI * M_PI), 1e-15);
}
