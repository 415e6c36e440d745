#include <benchmark/benchmark.h>

#include "boot/envs.hpp"
#include "boot/model.hpp"
#include "boot/planner.hpp"

namespace {

using namespace boot;

ModelConfig bench_config(int width, int layers) {
  ModelConfig c;
  c.vocab = 100;
  c.context = 80;
  c.width = width;
  c.layers = layers;
  c.heads = 4;
  c.ff_width = 4 * width;
  c.dropout = 0.0;
  return c;
}

std::vector<std::vector<int>> random_batch(int n, int length, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> u(0, 99);
  std::vector<std::vector<int>> b(n, std::vector<int>(length));
  for (auto& s : b)
    for (int& t : s) t = u(rng);
  return b;
}

void BM_LossAndGrad(benchmark::State& state) {
  const ModelParams p = init_params(bench_config(static_cast<int>(state.range(0)), 2));
  const auto batch = random_batch(static_cast<int>(state.range(1)), 80, 1);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(p, batch, true).loss);
  state.SetItemsProcessed(state.iterations() * state.range(1) * 80);
}
BENCHMARK(BM_LossAndGrad)->Args({32, 64})->Args({96, 16})->Unit(benchmark::kMillisecond);

void BM_ForwardBatch(benchmark::State& state) {
  const ModelParams p = init_params(bench_config(32, 2));
  const auto batch = random_batch(64, 80, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward_logprobs_batch(p, batch));
  state.SetItemsProcessed(state.iterations() * 64 * 80);
}
BENCHMARK(BM_ForwardBatch)->Unit(benchmark::kMillisecond);

void BM_DecoderStep(benchmark::State& state) {
  const ModelParams p = init_params(bench_config(32, 2));
  for (auto _ : state) {
    DecoderState d(p);
    for (int i = 0; i < 79; ++i) d.push(i % 100);
    benchmark::DoNotOptimize(d.logprobs().data());
  }
  state.SetItemsProcessed(state.iterations() * 79);
}
BENCHMARK(BM_DecoderStep)->Unit(benchmark::kMicrosecond);

void BM_Plan(benchmark::State& state) {
  const ModelParams p = init_params(bench_config(32, 2));
  const VocabLayout lay(4, 2, 100);
  const Discretizer d(lay, std::vector<double>(8, -2.0), std::vector<double>(8, 2.0));
  PlannerConfig cfg;
  cfg.beam_width = static_cast<int>(state.range(0));
  cfg.horizon = 5;
  const std::vector<int> ctx{10, 20, 30, 40};
  for (auto _ : state) benchmark::DoNotOptimize(plan(p, d, ctx, cfg).score);
}
BENCHMARK(BM_Plan)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
