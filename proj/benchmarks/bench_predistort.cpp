#include <benchmark/benchmark.h>

#include "satdpd/metrics.hpp"
#include "satdpd/predistort.hpp"

using namespace satdpd;

namespace {

std::shared_ptr<const VolterraKernels> bench_kernels() {
  auto k = std::make_shared<VolterraKernels>(1, 1, 3);
  k->set(1, {0}, cplx(1.0, 0.0));
  k->set(1, {1}, cplx(0.05, -0.02));
  k->set(3, {0, 0, 0}, cplx(-0.08, 0.05));
  k->set(3, {1, 0, 0}, cplx(0.02, 0.01));
  k->set(3, {-1, 0, 1}, cplx(0.01, -0.015));
  return k;
}

}  // namespace

static void BM_CoeffsVolterra(benchmark::State& state) {
  auto k = bench_kernels();
  const SymbolBlock x = random_symbols(make_apsk32(), 256, 5);
  long j = 64;
  for (auto _ : state) {
    auto c = estimate_coeffs_volterra(*k, x, j);
    benchmark::DoNotOptimize(c.a10.data());
    j = 64 + (j + 1) % 128;
  }
}
BENCHMARK(BM_CoeffsVolterra);

static void BM_CoeffsChannelSim(benchmark::State& state) {
  const ChannelModel ch{ChannelSpec{}};
  const SymbolBlock x = random_symbols(make_apsk32(), 256, 5);
  ChannelStepModel model(ch, x);
  long j = 64;
  for (auto _ : state) {
    auto c = estimate_coeffs_sim(model, j, 1e-4);
    benchmark::DoNotOptimize(c.a10.data());
    j = 64 + (j + 1) % 128;
  }
}
BENCHMARK(BM_CoeffsChannelSim)->Unit(benchmark::kMicrosecond);

static void BM_CoeffsLut(benchmark::State& state) {
  auto k = bench_kernels();
  const Constellation c32 = make_apsk32();
  auto lut = LutTable::build(k, c32, 3);
  const SymbolBlock s = random_symbols(c32, 256, 5);
  long j = 64;
  for (auto _ : state) {
    auto c = lut.coeffs(s, j);
    benchmark::DoNotOptimize(c.a10.data());
    j = 64 + (j + 1) % 128;
  }
}
BENCHMARK(BM_CoeffsLut);

static void BM_PredistortBlockKernels(benchmark::State& state) {
  auto k = bench_kernels();
  const SymbolBlock s = random_symbols(make_apsk32(), 256, 9);
  PredistortConfig cfg;
  cfg.backend = CoeffBackend::reduced_volterra;
  cfg.reduced_kernels = k;
  cfg.max_iters = 3;
  for (auto _ : state) {
    auto r = predistort_block(s, k, cfg);
    benchmark::DoNotOptimize(r.x.data());
  }
  state.SetItemsProcessed(state.iterations() * 256 * 3);
}
BENCHMARK(BM_PredistortBlockKernels)->Unit(benchmark::kMillisecond);
