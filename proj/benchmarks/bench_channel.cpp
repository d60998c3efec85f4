#include <benchmark/benchmark.h>

#include "satdpd/channel.hpp"

using namespace satdpd;

static void BM_ChannelSimulate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ChannelModel ch{ChannelSpec{}};
  const SymbolBlock x = random_symbols(make_apsk32(), n, 1);
  for (auto _ : state) {
    auto y = ch.simulate(x);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ChannelSimulate)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

static void BM_HpaSaleh(benchmark::State& state) {
  const HpaModel hpa = HpaModel::saleh();
  cplx v(0.4, 0.3);
  for (auto _ : state) {
    v = hpa.apply(v) * cplx(0.999, 0.001) + cplx(0.2, 0.0);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_HpaSaleh);
