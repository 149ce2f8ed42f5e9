#include <benchmark/benchmark.h>

#include "ehom/corrector.hpp"

using namespace ehom;

namespace {

CoefficientField make_field(Model m, int n) {
  EnvironmentSpec s;
  s.model = m;
  s.seed = 3;
  return generate_field(s, n, 1.0 / n);
}

void run(benchmark::State& state, Model m, Preconditioner pc) {
  const auto n = static_cast<int>(state.range(0));
  const CoefficientField f = make_field(m, n);
  const DirichletForm form(f);
  int iterations = 0;
  for (auto _ : state) {
    const CorrectorField chi = solve_correctors(form, 1e-10, 20000, pc);
    iterations = chi.stats[0].iterations;
    benchmark::DoNotOptimize(chi.chi.data());
  }
  state.counters["cg_iterations"] = iterations;
  state.counters["cells"] = static_cast<double>(f.num_cells());
}

void BM_CheckerboardMultigrid(benchmark::State& state) {
  run(state, model::Checkerboard{1.0, 4.0, static_cast<int>(state.range(0)) / 4}, Preconditioner::multigrid);
}
void BM_CheckerboardJacobi(benchmark::State& state) {
  run(state, model::Checkerboard{1.0, 4.0, static_cast<int>(state.range(0)) / 4}, Preconditioner::jacobi);
}
void BM_HeavyTailMultigrid(benchmark::State& state) {
  run(state, model::HeavyTail{3.0, 3.0, 1}, Preconditioner::multigrid);
}

void BM_Laplacian(benchmark::State& state) {
  const CoefficientField f = make_field(model::HeavyTail{3.0, 3.0, 1}, static_cast<int>(state.range(0)));
  const DirichletForm form(f);
  std::vector<double> x(f.num_cells(), 1.0), y(f.num_cells());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<double>(i % 7);
  }
  for (auto _ : state) {
    form.apply_laplacian(x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.num_cells()));
}

} // namespace

BENCHMARK(BM_CheckerboardMultigrid)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CheckerboardJacobi)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HeavyTailMultigrid)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Laplacian)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
