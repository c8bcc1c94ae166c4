#include <benchmark/benchmark.h>

#include "rb/bounds.hpp"
#include "rb/market_input.hpp"

namespace {

void BM_UpperBoundUniform(benchmark::State& state) {
  const rb::CallCurve c = rb::make_uniform_terminal_curve(0.0, 200.0);
  const rb::ImpliedLaw law = rb::implied_law(c);
  const rb::BarrierPair b{83.0, 117.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(rb::upper_bound(law, c, b));
  }
}
BENCHMARK(BM_UpperBoundUniform);

void BM_LowerBoundUniform(benchmark::State& state) {
  const rb::CallCurve c = rb::make_uniform_terminal_curve(0.0, 200.0);
  const rb::ImpliedLaw law = rb::implied_law(c);
  const rb::BarrierPair b{83.0, 117.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(rb::lower_bound(law, c, b));
  }
}
BENCHMARK(BM_LowerBoundUniform);

void BM_ClassifyUpperLognormal(benchmark::State& state) {
  const rb::CallCurve c = rb::make_lognormal_curve(100.0, 0.35);
  const rb::ImpliedLaw law = rb::implied_law(c);
  const rb::BarrierPair b{80.0, 125.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(rb::classify_upper(law, b));
  }
}
BENCHMARK(BM_ClassifyUpperLognormal);

}  // namespace

BENCHMARK_MAIN();
