#include <benchmark/benchmark.h>

#include "satdpd/dsp.hpp"

using namespace satdpd;

static void BM_SrrcFilter(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FirFilter srrc = design_srrc(0.1, 32, 8);
  const Constellation c = make_apsk32();
  const ComplexSignal x =
      upsample_insert_zeros(random_symbols(c, n, 1), 8);
  for (auto _ : state) {
    auto y = fir_filter(x, srrc);
    benchmark::DoNotOptimize(y.samples.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SrrcFilter)->Arg(256)->Arg(1024);

static void BM_NearestPoint(benchmark::State& state) {
  const Constellation c = make_apsk32();
  const SymbolBlock z = random_symbols(c, 4096, 3);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(nearest_point(z[i++ & 4095] + cplx(0.05, -0.02), c));
  }
}
BENCHMARK(BM_NearestPoint);
