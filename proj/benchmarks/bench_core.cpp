#include <benchmark/benchmark.h>

#include <cstdint>

#include "covertime/bridges.hpp"
#include "covertime/gw.hpp"
#include "covertime/lattice.hpp"
#include "covertime/rng.hpp"
#include "covertime/scales.hpp"

namespace {

using namespace covertime;

void BM_Substream(benchmark::State& state) {
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(substream(kDefaultSeed, i++));
  }
}
BENCHMARK(BM_Substream);

void BM_GwSample(benchmark::State& state) {
  const int horizon = static_cast<int>(state.range(0));
  Rng rng(substream(kDefaultSeed, 9001));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gw::gw_sample(20.0, horizon, rng));
  }
}
BENCHMARK(BM_GwSample)->Arg(8)->Arg(32);

void BM_ExtinctionDp(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  const double t = scales::excursion_budget(L, 0.0);
  for (auto _ : state) {
    gw::DpOptions opts;
    opts.condition_extinct = true;
    benchmark::DoNotOptimize(
        gw::barrier_prob_dp_full(L, t, nullptr, nullptr, opts));
  }
}
BENCHMARK(BM_ExtinctionDp)->Arg(10)->Arg(20);

void BM_CompoundSample(benchmark::State& state) {
  gw::CompoundParams params;
  params.n = 100;
  params.p = 0.25;
  params.q = 0.25;
  Rng rng(substream(kDefaultSeed, 9002));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gw::compound_sample(params, rng));
  }
}
BENCHMARK(BM_CompoundSample);

void BM_BridgeBarrierMc(benchmark::State& state) {
  Rng rng(substream(kDefaultSeed, 9003));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        bridges::bb_linear_barrier_mc(2.0, 1.0, 1.0, 64, 100, rng));
  }
}
BENCHMARK(BM_BridgeBarrierMc);

void BM_LatticeWalk(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  Rng rng(substream(kDefaultSeed, 9004));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        lattice::ctrw_run(L, 10.0, lattice::StopKind::kReturns, rng));
  }
}
BENCHMARK(BM_LatticeWalk)->Arg(8)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
