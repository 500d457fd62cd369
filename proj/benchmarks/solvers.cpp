#include "deeplin/kernel.hpp"
#include "deeplin/mlp_dmft.hpp"
#include "deeplin/resnet_dmft.hpp"
#include "deeplin/sgd_dmft.hpp"
#include "deeplin/simulator.hpp"
#include "deeplin/structured_dmft.hpp"

#include <benchmark/benchmark.h>

using namespace deeplin;

// Full-batch GD: O(L T^3) time.
static void BM_MlpGd(benchmark::State& st) {
  MlpGdConfig c;
  c.L = 3;
  c.nu = 1.0;
  c.alpha = 2.0;
  c.eta = 0.05;
  c.T = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(solve_mlp_gd(c));
  st.SetComplexityN(c.T);
}
BENCHMARK(BM_MlpGd)->RangeMultiplier(2)->Range(25, 200)->Complexity(benchmark::oNCubed)->Unit(benchmark::kMillisecond);

static void BM_OnlineSgd(benchmark::State& st) {
  SgdConfig c;
  c.L = 3;
  c.nu = 1.0;
  c.alpha_b = 0.5;
  c.eta = 0.05;
  c.T = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(solve_online_sgd(c));
  st.SetComplexityN(c.T);
}
BENCHMARK(BM_OnlineSgd)->RangeMultiplier(2)->Range(25, 200)->Complexity()->Unit(benchmark::kMillisecond);

static void BM_Resnet(benchmark::State& st) {
  ResnetConfig c;
  c.L = static_cast<int>(st.range(0));
  c.beta0 = 1.0;
  c.eta = 0.05;
  c.T = 20;
  ResnetDiagnostics d;
  for (auto _ : st) benchmark::DoNotOptimize(solve_resnet_gd(c, &d));
  st.counters["jacobian_MiB"] = static_cast<double>(d.jacobian_bytes) / (1 << 20);
  st.SetComplexityN(c.L);
}
BENCHMARK(BM_Resnet)->RangeMultiplier(2)->Range(4, 32)->Complexity()->Unit(benchmark::kMillisecond);

static void BM_InfiniteDepth(benchmark::State& st) {
  ResnetConfig c;
  c.beta0 = 1.2;
  c.eta = 0.01;
  c.T = 20;
  for (auto _ : st) benchmark::DoNotOptimize(solve_infinite_depth(c, {static_cast<int>(st.range(0))}));
}
BENCHMARK(BM_InfiniteDepth)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_Structured(benchmark::State& st) {
  StructuredConfig c;
  c.L = 2;
  c.eta = 0.1;
  c.T = 100;
  c.N = 64;
  c.B = 64;
  c.spectrum.K = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(solve_structured_sgd(c));
  st.SetComplexityN(c.spectrum.K);
}
BENCHMARK(BM_Structured)->RangeMultiplier(4)->Range(64, 1024)->Complexity()->Unit(benchmark::kMillisecond);

static void BM_SimulatorRun(benchmark::State& st) {
  SimConfig c;
  c.D = static_cast<int>(st.range(0));
  c.N = c.D / 2;
  c.P = c.D;
  c.L = 4;
  c.eta = 0.02;
  c.gamma0 = 2.0;
  c.T = 50;
  for (auto _ : st) {
    ++c.seed;
    benchmark::DoNotOptimize(train_finite_network(c));
  }
}
BENCHMARK(BM_SimulatorRun)->Arg(250)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_CausalPropagate(benchmark::State& st) {
  const int T = static_cast<int>(st.range(0));
  const Matrix memory = Matrix::Random(T, T) * (0.5 / T);
  const Matrix forcing = Matrix::Random(T, 8);
  for (auto _ : st) benchmark::DoNotOptimize(causal_propagate(memory, forcing));
}
BENCHMARK(BM_CausalPropagate)->RangeMultiplier(4)->Range(64, 1024);

BENCHMARK_MAIN();
