#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "ehom/corrector.hpp"
#include "ehom/energy.hpp"
#include "ehom/errors.hpp"
#include "ehom/homogenize.hpp"
#include "support/dense_oracle.hpp"

using namespace ehom;
using ehom::oracle::dense_oracle;
using ehom::oracle::DenseSolution;

namespace {

EnvironmentSpec spec_of(Model m, int d = 2, std::uint64_t seed = 7) {
  EnvironmentSpec s;
  s.model = m;
  s.dimension = d;
  s.seed = seed;
  return s;
}

EffectiveMatrix solve_D(const CoefficientField& f, Preconditioner pc = Preconditioner::multigrid) {
  const DirichletForm form(f);
  return effective_matrix(form, solve_correctors(form, 1e-12, 20000, pc));
}

} // namespace

TEST(Corrector, IdentityHasZeroCorrector) {
  const auto f = generate_field(spec_of(model::Identity{}, 3), 8, 0.125);
  const DirichletForm form(f);
  const auto chi = solve_correctors(form, 1e-12, 100);
  for (const auto& c : chi.chi) {
    for (double v : c) {
      EXPECT_EQ(v, 0.0);
    }
  }
  const auto D = effective_matrix(form, chi);
  EXPECT_NEAR((D.D - 2.0 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

class DenseOracle : public ::testing::TestWithParam<int> {};

TEST_P(DenseOracle, IterativeMatchesDenseSolve) {
  const std::vector<Model> models = {model::HeavyTail{3.0, 3.0, 1}, model::Checkerboard{1.0, 4.0, 2},
                                     model::Laminate{1.0, 4.0, 0.5}, model::HeavyTail{2.0, 1.5, 2}};
  const auto f = generate_field(spec_of(models[static_cast<std::size_t>(GetParam())], 2, 100 + GetParam()), 16,
                                1.0 / 16);
  const DenseSolution dense = dense_oracle(f);
  const DirichletForm form(f);
  const auto chi = solve_correctors(form, 1e-13, 5000);
  for (int k = 0; k < 2; ++k) {
    for (std::size_t c = 0; c < f.num_cells(); ++c) {
      EXPECT_NEAR(chi.chi[static_cast<std::size_t>(k)][c], dense.chi[static_cast<std::size_t>(k)](static_cast<Eigen::Index>(c)), 1e-8);
    }
  }
  const auto D = effective_matrix(form, chi);
  EXPECT_LT((D.D - dense.D).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(D.asymmetry, 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Fields, DenseOracle, ::testing::Range(0, 4));

TEST(Corrector, ThreeDimensionalDenseOracle) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}, 3, 9), 6, 1.0 / 6);
  const DenseSolution dense = dense_oracle(f);
  const auto D = solve_D(f);
  EXPECT_LT((D.D - dense.D).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Corrector, PreconditionersAgree) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}, 2, 21), 32, 1.0 / 32);
  const auto a = solve_D(f, Preconditioner::none);
  const auto b = solve_D(f, Preconditioner::jacobi);
  const auto c = solve_D(f, Preconditioner::multigrid);
  EXPECT_LT((a.D - c.D).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((b.D - c.D).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Corrector, LaminateHarmonicAndArithmeticMeans) {
  const auto f = generate_field(spec_of(model::Laminate{1.0, 4.0, 0.5}), 64, 1.0 / 64);
  const auto D = solve_D(f);
  EXPECT_NEAR(D.D(0, 0), 3.2, 1e-9);
  EXPECT_NEAR(D.D(1, 1), 5.0, 1e-9);
  EXPECT_NEAR(D.D(0, 1), 0.0, 1e-9);
}

TEST(Corrector, TranslationInvariance) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}, 2, 4), 16, 1.0 / 16);
  const std::int64_t off[] = {5, 11};
  const auto a = solve_D(f);
  const auto b = solve_D(translate(f, off));
  EXPECT_LT((a.D - b.D).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Corrector, LinearInConductanceScale) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}, 2, 8), 16, 1.0 / 16);
  std::vector<double> e(f.entries().begin(), f.entries().end());
  for (double& v : e) {
    v *= 3.0;
  }
  const auto a = solve_D(f);
  const auto b = solve_D(CoefficientField(f.grid(), f.spacing(), e));
  EXPECT_LT((3.0 * a.D - b.D).cwiseAbs().maxCoeff(), 1e-9);
}

// det D[a] det D[1/a] = 16 for layered media, whose edges invert exactly.
TEST(Corrector, DualityDeterminantOfLayeredMedium) {
  const Grid g(2, 16);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.2, 5.0);
  std::vector<double> layer(16);
  for (double& v : layer) {
    v = u(rng);
  }
  std::vector<double> e(g.size() * 3, 0.0), inv(g.size() * 3, 0.0);
  for (std::size_t c = 0; c < g.size(); ++c) {
    const double a = layer[static_cast<std::size_t>(g.coord(c, 0))];
    e[3 * c] = e[3 * c + 2] = a;
    inv[3 * c] = inv[3 * c + 2] = 1.0 / a;
  }
  const auto D = solve_D(CoefficientField(g, 1.0 / 16, e));
  const auto Dinv = solve_D(CoefficientField(g, 1.0 / 16, inv));
  EXPECT_NEAR(D.D.determinant() * Dinv.D.determinant(), 16.0, 1e-8);
}

TEST(Corrector, CheckerboardNearDualityOracle) {
  const auto f = generate_field(spec_of(model::Checkerboard{1.0, 4.0, 16}), 64, 1.0 / 64);
  const auto D = solve_D(f);
  EXPECT_NEAR(D.D(0, 0), 4.0, 0.04 * 4.0);
  EXPECT_NEAR(D.D(0, 0), D.D(1, 1), 1e-9);
}

TEST(Corrector, HarmonicCoordinatesAndDiagnostics) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}, 2, 2), 32, 1.0 / 32);
  const DirichletForm form(f);
  const auto chi = solve_correctors(form, 1e-11, 5000);
  const auto hc = harmonic_coordinates(form, chi);
  const auto diag = mean_zero_and_energy_checks(chi, form);
  const auto D = effective_matrix(form, chi);
  for (int k = 0; k < 2; ++k) {
    EXPECT_LT(hc.harmonicity_residual[static_cast<std::size_t>(k)], 1e-10);
    EXPECT_LT(diag.chi_mean[static_cast<std::size_t>(k)], 1e-12);
    for (double gm : diag.gradient_mean[static_cast<std::size_t>(k)]) {
      EXPECT_LT(gm, 1e-12);
    }
    EXPECT_NEAR(2.0 * diag.energy_per_volume[static_cast<std::size_t>(k)], D.D(k, k), 1e-10);
  }
}

// y^k minimises the energy among pi^k + periodic perturbations.
TEST(Corrector, VariationalMinimality) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}, 2, 13), 16, 1.0 / 16);
  const DirichletForm form(f);
  const auto chi = solve_correctors(form, 1e-12, 5000);
  const auto hc = harmonic_coordinates(form, chi);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 0.01);
  for (int k = 0; k < 2; ++k) {
    const CellFunction& y = hc.y[static_cast<std::size_t>(k)];
    const double e0 = energy(form, y, y);
    for (int trial = 0; trial < 10; ++trial) {
      CellFunction z = y;
      for (double& v : z.values) {
        v += nd(rng);
      }
      EXPECT_GT(energy(form, z, z), e0);
    }
  }
}

TEST(Corrector, BoundsHoldOnRandomFields) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}, 2, seed), 16, 1.0 / 16);
    const auto D = solve_D(f);
    const auto rep = check_bounds(D, f, test_directions(2, 20, seed));
    EXPECT_TRUE(rep.all_ok);
    EXPECT_EQ(rep.rows.size(), 22u);
    EXPECT_GT(D.eigenvalues.minCoeff(), 0.0);
  }
}

TEST(Corrector, BoundsRefuseForeignField) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}, 2, 1), 8, 0.125);
  const auto g = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}, 2, 2), 8, 0.125);
  const auto D = solve_D(f);
  EXPECT_THROW(check_bounds(D, g, test_directions(2, 1, 0)), ConsistencyError);
}

TEST(Corrector, TrapRefused) {
  const auto f = generate_field(spec_of(model::BesselTrap{2.0}), 16, 1.0 / 16);
  const DirichletForm form(f);
  EXPECT_THROW(solve_correctors(form, 1e-10, 100), SingularityError);
}

TEST(Corrector, NonConvergenceReported) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}, 2, 1), 32, 1.0 / 32);
  const DirichletForm form(f);
  try {
    solve_correctors(form, 1e-14, 2, Preconditioner::none);
    FAIL() << "expected NonConvergenceError";
  } catch (const NonConvergenceError& e) {
    EXPECT_EQ(e.iterations(), 2);
    EXPECT_GT(e.last_residual(), 0.0);
  }
}

TEST(Corrector, SublinearityCsvAndShape) {
  const int sizes[] = {16, 32, 64};
  const auto curve = sublinearity_scan(spec_of(model::Checkerboard{1.0, 4.0, 2}), 0.25, sizes, 1, 1e-10, 5000);
  ASSERT_EQ(curve.epsilons.size(), 3u);
  EXPECT_GT(curve.epsilons[0], curve.epsilons[2]);
  ASSERT_TRUE(curve.slope.has_value());
  EXPECT_LT(*curve.slope, -0.5);
  EXPECT_EQ(curve.to_csv().substr(0, 22), "epsilon,sup_norm,seed\n");
}
