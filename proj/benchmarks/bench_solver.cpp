#include <benchmark/benchmark.h>

#include "riskstop/exp_solver.hpp"
#include "riskstop/grid_solver.hpp"
#include "riskstop/house_selling.hpp"
#include "riskstop/simulator.hpp"

namespace {

riskstop::StoppingProblem house5() {
  return riskstop::make_house_problem({1, 1, 1, 1, 1}, 0.2,
                                      riskstop::Utility::logarithmic(0.0));
}

void BM_ApplyT(benchmark::State& state) {
  riskstop::StoppingProblem p = house5();
  riskstop::TimeGrid grid(10.0, 10.0 / static_cast<double>(state.range(0)));
  riskstop::ValueField v = riskstop::initial_value(p, grid);
  for (auto _ : state) {
    riskstop::SweepResult r = riskstop::apply_T(p, v);
    benchmark::DoNotOptimize(r.value);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) *
                          p.num_states());
}
BENCHMARK(BM_ApplyT)->Arg(1000)->Arg(4000)->Arg(16000);

void BM_SolveInfiniteHouse(benchmark::State& state) {
  riskstop::StoppingProblem p = house5();
  riskstop::TimeGrid grid(10.0, 10.0 / static_cast<double>(state.range(0)));
  for (auto _ : state) {
    riskstop::InfiniteSolution s = riskstop::solve_infinite(p, grid);
    benchmark::DoNotOptimize(s.value);
  }
}
BENCHMARK(BM_SolveInfiniteHouse)->Arg(1000)->Arg(4000);

void BM_ExpFixedPoint(benchmark::State& state) {
  riskstop::CtmcModel m = riskstop::CtmcModel::make({{-3.0, 2.0, 1.0},
                                                     {1.0, -2.5, 1.5},
                                                     {2.0, 2.0, -4.0}});
  riskstop::StoppingProblem p(m, {1.0, 2.0, 3.0}, 0.5,
                              riskstop::Utility::exponential(1.0));
  for (auto _ : state) {
    riskstop::ExpSolution s = riskstop::solve_exp_infinite(p);
    benchmark::DoNotOptimize(s.w);
  }
}
BENCHMARK(BM_ExpFixedPoint);

void BM_SamplePaths(benchmark::State& state) {
  riskstop::StoppingProblem p = house5();
  riskstop::TimeGrid grid(10.0, 0.01);
  riskstop::InfiniteSolution sol = riskstop::solve_infinite(p, grid);
  riskstop::JumpKernel kernel = riskstop::model_kernel(p.model());
  std::uint64_t path = 0;
  for (auto _ : state) {
    std::mt19937_64 eng = riskstop::path_engine(7, path++);
    riskstop::StopOutcome o =
        riskstop::simulate_stop(kernel, sol.rule, 0, 10000, eng);
    benchmark::DoNotOptimize(o);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SamplePaths);

}  // namespace

BENCHMARK_MAIN();
