#include "gplasc/geometry.hpp"
#include "gplasc/losses.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

using namespace gplasc;

namespace {

FeatureSet make_features(int n, int h, int classes) {
  Rng rng(7);
  FeatureSet fs;
  fs.features = rng.normal_matrix(n, h);
  normalize_rows(fs.features);
  for (int i = 0; i < n; ++i) {
    fs.labels.push_back(i % classes);
    fs.task_ids.push_back(0);
  }
  return fs;
}

Batch full_batch(int n) {
  Batch batch(static_cast<std::size_t>(n));
  std::iota(batch.begin(), batch.end(), 0);
  return batch;
}

}  // namespace

static void BM_SupconBatch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FeatureSet fs = make_features(n, 16, 4);
  const Batch batch = full_batch(n);
  LossParams params;
  params.tau = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(supcon_batch(fs, batch, params));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_SupconBatch)->Arg(32)->Arg(128)->Arg(512)->Complexity(benchmark::oNSquared);

static void BM_SupconBatchGrad(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FeatureSet fs = make_features(n, 16, 4);
  const Batch batch = full_batch(n);
  LossParams params;
  params.tau = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(supcon_batch_grad(fs, batch, params));
  }
}
BENCHMARK(BM_SupconBatchGrad)->Arg(32)->Arg(128)->Arg(512);

static void BM_RangePenalty(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FeatureSet fs = make_features(n, 16, 4);
  const Batch batch = full_batch(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(range_penalty(fs, batch, 0.3));
  }
}
BENCHMARK(BM_RangePenalty)->Arg(128)->Arg(512);

static void BM_GplascTotal(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const RegionPlan plan = make_region_plan(4, 4, 16, 0.3, 3);
  const FeatureSet fs = make_features(n, 16, 4);
  LossParams params;
  params.tau = 0.1;
  params.k = plan.k;
  params.lambda_range = 1.0;
  params.lambda_position = 1.0;
  const std::vector<Batch> batches = {full_batch(n)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(gplasc_total(fs, batches, plan, params));
  }
}
BENCHMARK(BM_GplascTotal)->Arg(128)->Arg(512);

BENCHMARK_MAIN();
