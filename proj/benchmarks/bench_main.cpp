#include <benchmark/benchmark.h>

#include "samlab/manifold.hpp"
#include "samlab/optim.hpp"
#include "samlab/rng.hpp"
#include "samlab/sharpness.hpp"

using namespace samlab;

static void BM_EigSym(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CounterRng rng(1);
  SymMatrix a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a.set(i, j, rng.uniform() - 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(eig_sym(a));
}
BENCHMARK(BM_EigSym)->Arg(4)->Arg(6)->Arg(20);

static void BM_SamStep(benchmark::State& state) {
  const LossPtr toy = std::make_shared<Toy4DLoss>();
  OptimizerConfig cfg;
  cfg.eta = 0.005;
  auto stepper = make_stepper(state.range(0) ? Algorithm::kAscGd : Algorithm::kSam, toy, cfg);
  Vector x{0.5, 0.5, 0.2, 0.1};
  for (auto _ : state) {
    x = stepper->step(x);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_SamStep)->Arg(0)->Arg(1)->ArgNames({"asc"});

static void BM_Phi(benchmark::State& state) {
  const Toy4DLoss toy;
  for (auto _ : state) benchmark::DoNotOptimize(phi(toy, Vector{0.5, 0.5, 0.01, 0.01}));
}
BENCHMARK(BM_Phi);

static void BM_WorstSharpness(benchmark::State& state) {
  const Toy4DLoss toy;
  for (auto _ : state) benchmark::DoNotOptimize(worst_sharpness(toy, Vector{0.5, 0.5, 0.001, 0.0}, 0.01));
}
BENCHMARK(BM_WorstSharpness);

static void BM_AvgSharpness(benchmark::State& state) {
  const Toy4DLoss toy;
  const auto threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(avg_sharpness(toy, Vector(4), 0.01, 100'000, 0, threads));
}
BENCHMARK(BM_AvgSharpness)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
