#include <benchmark/benchmark.h>

#include <complex>
#include <vector>

#include "s2p2/rng.hpp"
#include "s2p2/scan.hpp"

namespace {

using cplx = std::complex<double>;

struct ScanInputs {
  std::vector<cplx> a, b, x;
  ScanInputs(std::size_t n, std::size_t p) : a(n * p), b(n * p), x(n * p) {
    s2p2::Philox rng(7, n);
    for (std::size_t i = 0; i < n * p; ++i) {
      a[i] = std::polar(rng.uniform(0.5, 0.999), rng.uniform(-3.0, 3.0));
      b[i] = cplx(rng.normal(), rng.normal());
    }
  }
};

void run_scan(benchmark::State& state, s2p2::ScanMode mode) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = static_cast<std::size_t>(state.range(1));
  const int threads = static_cast<int>(state.range(2));
  ScanInputs in(n, p);
  for (auto _ : state) {
    s2p2::linear_scan(in.a.data(), in.b.data(), nullptr, in.x.data(), n, p, mode, threads);
    benchmark::DoNotOptimize(in.x.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void BM_ScanSequential(benchmark::State& state) { run_scan(state, s2p2::ScanMode::sequential); }
void BM_ScanParallel(benchmark::State& state) { run_scan(state, s2p2::ScanMode::parallel); }

}  // namespace

BENCHMARK(BM_ScanSequential)->ArgsProduct({benchmark::CreateRange(1 << 8, 1 << 18, 8), {16}, {1}});
BENCHMARK(BM_ScanParallel)
    ->ArgsProduct({benchmark::CreateRange(1 << 8, 1 << 18, 8), {16}, {2, 4}})
    ->UseRealTime();
