#include "gplasc/geometry.hpp"
#include "gplasc/metrics.hpp"

#include <benchmark/benchmark.h>

using namespace gplasc;

static void BM_MakeSimplexEtf(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(make_simplex_etf(2 * k, k, 7));
  }
}
BENCHMARK(BM_MakeSimplexEtf)->Arg(4)->Arg(16)->Arg(64);

static void BM_MakeRegionPlan(benchmark::State& state) {
  const int tasks = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(make_region_plan(tasks, 4, 2 * tasks, 0.15, 7));
  }
}
BENCHMARK(BM_MakeRegionPlan)->Arg(5)->Arg(20);

static void BM_OverlapEo(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  Matrix a = rng.normal_matrix(n, 3);
  Matrix b = rng.normal_matrix(n, 3);
  b.col(0).array() += 2.0;
  OverlapConfig cfg;
  cfg.grid_resolution = 32;
  for (auto _ : state) {
    benchmark::DoNotOptimize(overlap_eo(a, b, cfg));
  }
}
BENCHMARK(BM_OverlapEo)->Arg(50)->Arg(200);

BENCHMARK_MAIN();
