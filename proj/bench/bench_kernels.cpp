// Serial reference kernels vs the OpenMP versions, plus a whole forward pass.
//   ./bench_kernels --benchmark_filter=Linear

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sadi/kernels.hpp"
#include "sadi/planted.hpp"

namespace {

std::vector<float> random_vector(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

template <bool Parallel>
void BM_Linear(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto in = random_vector(rows * dim, 1);
  const auto w = random_vector(dim * 4 * dim, 2);
  const auto b = random_vector(4 * dim, 3);
  std::vector<float> out(rows * 4 * dim);
  for (auto _ : state) {
    if constexpr (Parallel)
      sadi::kernels::linear(out, in, w, b, rows, dim, 4 * dim);
    else
      sadi::kernels::serial::linear(out, in, w, b, rows, dim, 4 * dim);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(rows * dim * 4 * dim));
}

template <bool Parallel>
void BM_Attention(benchmark::State& state) {
  const auto seq = static_cast<std::size_t>(state.range(0));
  const std::size_t heads = 12, d_head = 64, d = heads * d_head;
  const auto qkv = random_vector(seq * 3 * d, 4);
  std::vector<float> out(seq * d);
  for (auto _ : state) {
    if constexpr (Parallel)
      sadi::kernels::causal_attention(out, qkv, seq, heads, d_head);
    else
      sadi::kernels::serial::causal_attention(out, qkv, seq, heads, d_head);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_PlantedForward(benchmark::State& state) {
  const auto bundle = sadi::planted::build_model();
  const auto items = sadi::planted::mc_items(1, 7);
  const auto tokens = bundle.tokenizer.encode(items[0].question + " yes .");
  for (auto _ : state) benchmark::DoNotOptimize(sadi::forward(bundle.weights, tokens));
}

}  // namespace

BENCHMARK(BM_Linear<false>)->Args({64, 256})->Args({256, 768});
BENCHMARK(BM_Linear<true>)->Args({64, 256})->Args({256, 768});
BENCHMARK(BM_Attention<false>)->Arg(128)->Arg(512);
BENCHMARK(BM_Attention<true>)->Arg(128)->Arg(512);
BENCHMARK(BM_PlantedForward);

BENCHMARK_MAIN();
