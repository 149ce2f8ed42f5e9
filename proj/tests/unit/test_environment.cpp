#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "ehom/environment.hpp"
#include "ehom/errors.hpp"
#include "ehom/field_io.hpp"
#include "ehom/moser.hpp"

using namespace ehom;

namespace {

EnvironmentSpec spec_of(Model m, int d = 2, std::uint64_t seed = 7) {
  EnvironmentSpec s;
  s.model = m;
  s.dimension = d;
  s.seed = seed;
  return s;
}

} // namespace

TEST(Environment, IdentityIsUnitEverywhere) {
  const auto f = generate_field(spec_of(model::Identity{}, 3), 4, 0.25);
  for (std::size_t c = 0; c < f.num_cells(); ++c) {
    EXPECT_EQ(f.lambda()[c], 1.0);
    EXPECT_EQ(f.Lambda()[c], 1.0);
    EXPECT_EQ(f.entry(c, 0, 1), 0.0);
  }
}

TEST(Environment, LaminateLayersAlongFirstAxis) {
  const auto f = generate_field(spec_of(model::Laminate{1.0, 4.0, 0.5}), 8, 1.0 / 8);
  int low = 0;
  for (std::size_t c = 0; c < f.num_cells(); ++c) {
    const double a = f.diagonal(c, 0);
    EXPECT_TRUE(a == 1.0 || a == 4.0);
    low += a == 1.0;
    EXPECT_EQ(f.diagonal(c, 0), f.diagonal(f.grid().neighbor(c, 1, +1), 0));
  }
  EXPECT_EQ(low, 32);
}

TEST(Environment, CheckerboardTiles) {
  const auto f = generate_field(spec_of(model::Checkerboard{1.0, 4.0, 2}), 8, 1.0 / 8);
  const Grid& g = f.grid();
  for (std::size_t c = 0; c < f.num_cells(); ++c) {
    const int parity = (g.coord(c, 0) / 2 + g.coord(c, 1) / 2) % 2;
    EXPECT_EQ(f.diagonal(c, 0), parity == 0 ? 1.0 : 4.0);
  }
}

TEST(Environment, InvalidParametersRejected) {
  EXPECT_THROW(spec_of(model::ScaledIdentity{-1.0}).validate(), ConfigError);
  EXPECT_THROW(spec_of(model::Laminate{1.0, 4.0, 1.5}).validate(), ConfigError);
  EXPECT_THROW(spec_of(model::HeavyTail{3.0, 3.0, 0}).validate(), ConfigError);
  EXPECT_THROW(generate_field(spec_of(model::Checkerboard{1.0, 4.0, 3}), 8, 0.125), ConfigError);
}

// Pareto tails: E[u^(-q/lo)] = lo / (lo - q) and E[v^(-p/hi)] = hi / (hi - p).
TEST(Environment, HeavyTailMomentsMatchPareto) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}, 2, 11), 512, 1.0 / 512);
  const MomentReport r = validate_moments(f, 1.0, 1.0);
  EXPECT_NEAR(r.emp_lambda_inv_q, 1.5, 0.01);
  EXPECT_NEAR(r.emp_Lambda_p, 1.5, 0.01);
}

TEST(Environment, HeavyTailIsAxisAligned) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 2}), 16, 1.0 / 16);
  for (std::size_t c = 0; c < f.num_cells(); ++c) {
    EXPECT_EQ(f.entry(c, 0, 1), 0.0);
    EXPECT_LE(f.lambda()[c], 1.0);
    EXPECT_GE(f.Lambda()[c], 1.0);
  }
}

// Same absolute lattice keys give the same medium inside every box.
TEST(Environment, NestedBoxesShareTheMedium) {
  const auto spec = spec_of(model::HeavyTail{3.0, 3.0, 1}, 2, 3);
  const auto small = generate_field(spec, 8, 1.0, -4);
  const auto large = generate_field(spec, 16, 1.0, -8);
  for (std::size_t c = 0; c < small.num_cells(); ++c) {
    const std::int64_t xy[2] = {small.grid().coord(c, 0) + 4, small.grid().coord(c, 1) + 4};
    EXPECT_EQ(small.diagonal(c, 0), large.diagonal(large.grid().index(xy), 0));
  }
}

TEST(Environment, MomentAdmissibilityIsStrict) {
  EXPECT_FALSE(moments_admissible(2.0, 2.0, 2));
  EXPECT_TRUE(moments_admissible(3.0, 3.0, 2));
  EXPECT_FALSE(moments_admissible(3.0, 3.0, 3));
  EXPECT_TRUE(moments_admissible(kInf, kInf, 3));
  const auto f = generate_field(spec_of(model::Identity{}), 4, 0.25);
  EXPECT_FALSE(validate_moments(f, 2.0, 2.0).admissible);
  EXPECT_TRUE(validate_moments(f, 3.0, 3.0).admissible);
}

// avg of max(r, h)^-2 over the unit square grows by 2 pi ln 2 per doubling.
TEST(Environment, TrapMomentGrowsLogarithmically) {
  const auto spec = spec_of(model::BesselTrap{2.0});
  const double m256 = validate_moments(generate_field(spec, 256, 1.0 / 256), kInf, 1.0).emp_lambda_inv_q;
  const double m512 = validate_moments(generate_field(spec, 512, 1.0 / 512), kInf, 1.0).emp_lambda_inv_q;
  EXPECT_NEAR(m512 - m256, 2.0 * std::numbers::pi * std::log(2.0), 0.02 * 2.0 * std::numbers::pi * std::log(2.0));
}

TEST(Environment, TrapSweepDiverges) {
  const int sizes[] = {16, 32, 64, 128};
  for (double q : {1.0, 2.0, 4.0}) {
    const MomentSweep sw = moment_sweep(spec_of(model::BesselTrap{2.0}), 8.0, q, sizes);
    EXPECT_TRUE(sw.diverging) << "q = " << q;
    EXPECT_FALSE(sw.admissible);
  }
  const MomentSweep ok = moment_sweep(spec_of(model::HeavyTail{3.0, 3.0, 1}), 1.5, 1.5, sizes, 3);
  EXPECT_FALSE(ok.diverging);
}

TEST(Environment, MuckenhauptRatioMatchesDirectAverages) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}), 32, 1.0 / 32);
  const double radii[] = {0.125, 0.25};
  const auto rows = doubling_diagnostic(f, 100, radii);
  ASSERT_EQ(rows.size(), 2u);
  std::vector<double> centre(2);
  for (int a = 0; a < 2; ++a) {
    centre[static_cast<std::size_t>(a)] = cell_center(f.grid(), 100, a, f.spacing());
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const auto cells = ball_cells(f.grid(), f.spacing(), Ball{centre, radii[k]});
    double lam = 0.0, inv = 0.0;
    for (std::size_t c : cells) {
      lam += f.Lambda()[c];
      inv += 1.0 / f.lambda()[c];
    }
    const double n = static_cast<double>(cells.size());
    EXPECT_NEAR(rows[k].muckenhaupt_ratio, (lam / n) * (inv / n), 1e-12);
    EXPECT_GE(rows[k].muckenhaupt_ratio, 1.0);
  }
  EXPECT_THROW(doubling_diagnostic(f, 0, std::vector<double>{0.75}), RangeError);
}

TEST(Environment, TranslationMovesCells) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 3.0, 1}), 8, 0.125);
  const std::int64_t off[] = {3, -2};
  const auto t = translate(f, off);
  for (std::size_t c = 0; c < f.num_cells(); ++c) {
    EXPECT_EQ(t.diagonal(c, 0), f.diagonal(f.grid().shift(c, off), 0));
  }
}

TEST(FieldIo, RoundTripIsBitIdentical) {
  const auto f = generate_field(spec_of(model::HeavyTail{3.0, 2.5, 1}, 3, 5), 6, 0.5);
  std::stringstream a;
  write_field(a, f);
  const auto g = read_field(a);
  EXPECT_TRUE(f == g);
  EXPECT_EQ(f.hash(), g.hash());
  std::stringstream b;
  write_field(b, g);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, 4), "EHF1");
}

TEST(FieldIo, BadMagicRejected) {
  std::stringstream s("XXXX0000");
  EXPECT_THROW(read_field(s), FormatError);
}

TEST(FieldIo, ScalarFieldsAndWalkRoundTrip) {
  ScalarFields sf{Grid(2, 3), 0.5, {{1, 2, 3, 4, 5, 6, 7, 8, 9}, {0, -1, 0.25, 0, 0, 0, 0, 0, 1e-300}}};
  std::stringstream s;
  write_scalar_fields(s, sf);
  const auto back = read_scalar_fields(s);
  EXPECT_EQ(back.fields, sf.fields);
  EXPECT_EQ(back.spacing, 0.5);

  WalkTrace w{2, 42, {0.0, 0.5, 1.25}, {0, 0, 1, 0, 1, -1}};
  std::stringstream t;
  write_walk(t, w);
  const auto wb = read_walk(t);
  EXPECT_EQ(wb.path_id, 42u);
  EXPECT_EQ(wb.times, w.times);
  EXPECT_EQ(wb.cells, w.cells);
}
