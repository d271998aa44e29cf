#include <benchmark/benchmark.h>

#include <numeric>

#include "s2p2/model.hpp"
#include "s2p2/simulate.hpp"
#include "s2p2/train.hpp"

namespace {

s2p2::S2P2Config config(int hidden, int state, int layers) {
  s2p2::S2P2Config cfg;
  cfg.num_marks = 1;
  cfg.hidden = hidden;
  cfg.state = state;
  cfg.layers = layers;
  cfg.seed = 1;
  return cfg;
}

s2p2::Dataset hawkes_batch(std::size_t n) {
  s2p2::Dataset data;
  const auto p = s2p2::ExpHawkesParams::univariate(0.5, 0.5, 1.0);
  for (std::size_t i = 0; i < n; ++i) data.sequences.push_back(s2p2::simulate_hawkes(p, 100.0, 3, i));
  return data;
}

void BM_Condition(benchmark::State& state) {
  const s2p2::S2P2Model model(config(16, 16, 2));
  const auto data = hawkes_batch(1);
  const auto& seq = data.sequences.front();
  for (auto _ : state) benchmark::DoNotOptimize(s2p2::condition(model, seq));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * seq.size()));
}

void BM_LogLikelihood(benchmark::State& state) {
  const s2p2::S2P2Model model(config(16, 16, 2));
  const auto data = hawkes_batch(1);
  const auto& seq = data.sequences.front();
  const int mc = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(s2p2::log_likelihood(model, seq, mc, 5));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * seq.size()));
}

void BM_BatchGradient(benchmark::State& state) {
  const s2p2::S2P2Model model(
      config(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)), static_cast<int>(state.range(1))));
  const auto data = hawkes_batch(16);
  std::vector<std::size_t> idx(data.sequences.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(s2p2::batch_gradient(model, data, idx, 10, 5, 1));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * data.num_events()));
}

}  // namespace

BENCHMARK(BM_Condition)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LogLikelihood)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradient)->Args({8, 1})->Args({16, 2})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
