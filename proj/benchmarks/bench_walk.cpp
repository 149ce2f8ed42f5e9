#include <benchmark/benchmark.h>

#include "ehom/corrector.hpp"
#include "ehom/montecarlo.hpp"

using namespace ehom;

namespace {

void BM_Walk(benchmark::State& state) {
  EnvironmentSpec s;
  s.model = model::Checkerboard{1.0, 4.0, 16};
  const CoefficientField f = generate_field(s, 128, 1.0 / 128);
  const DirichletForm form(f);
  WalkConfig c;
  c.paths = static_cast<int>(state.range(0));
  c.t_max = 0.1;
  std::uint64_t jumps = 0;
  for (auto _ : state) {
    const WalkResult w = simulate_walk(form, c);
    for (const auto& p : w.paths) {
      jumps += p.jumps;
    }
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(jumps));
  state.SetLabel("items = jumps");
}

void BM_WalkWithFunctionals(benchmark::State& state) {
  EnvironmentSpec s;
  s.model = model::HeavyTail{3.0, 3.0, 1};
  const CoefficientField f = generate_field(s, 128, 1.0 / 128);
  const DirichletForm form(f);
  const CorrectorField chi = solve_correctors(form, 1e-10, 20000);
  WalkConfig c;
  c.paths = static_cast<int>(state.range(0));
  c.t_max = 0.1;
  RecordSpec r;
  r.functionals = quadratic_variation_densities(form, chi);
  r.theta.assign(f.Lambda().begin(), f.Lambda().end());
  r.clock_times = {0.1};
  std::uint64_t jumps = 0;
  for (auto _ : state) {
    const WalkResult w = simulate_walk(form, c, r);
    for (const auto& p : w.paths) {
      jumps += p.jumps;
    }
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(jumps));
}

} // namespace

BENCHMARK(BM_Walk)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WalkWithFunctionals)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
