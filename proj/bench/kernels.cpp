// Serial reference path vs OpenMP path for the hot kernels of a particle run.

#include <benchmark/benchmark.h>

#include "vptrap/kinetic.hpp"
#include "vptrap/poisson.hpp"

namespace {

using namespace vptrap;

vptrap::Exec exec_of(const benchmark::State& st) { return st.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

const ParticleEnsemble& ensemble() {
  static const ParticleEnsemble e = [] {
    SimConfig c;
    return sample_initial(reference_initial(c), 20000, c.seed, false);
  }();
  return e;
}

void BM_PairwiseForce(benchmark::State& st) {
  const ParticleEnsemble& e = ensemble();
  const SourceSet src = e.sources();
  std::vector<Vec> targets;
  for (std::size_t i = 0; i < 500; ++i) targets.push_back(e.points[i].x);
  for (auto _ : st) benchmark::DoNotOptimize(pairwise_force(targets, src, 0.1, exec_of(st)));
}

void BM_DepositDensity(benchmark::State& st) {
  SimConfig c;
  for (auto _ : st) benchmark::DoNotOptimize(deposit_density(ensemble(), 0.0, c, nullptr, exec_of(st)));
}

void BM_GridForce(benchmark::State& st) {
  SimConfig c;
  c.grid_cells = static_cast<int>(st.range(1));
  const GridField rho = deposit_density(ensemble(), 0.0, c, nullptr, Exec::Serial);
  for (auto _ : st) benchmark::DoNotOptimize(grid_force_from_density(rho, exec_of(st)));
}

}  // namespace

// range(0): 0 = serial reference, 1 = OpenMP
BENCHMARK(BM_PairwiseForce)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DepositDensity)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridForce)->Args({0, 32})->Args({1, 32})->Args({0, 64})->Args({1, 64})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
