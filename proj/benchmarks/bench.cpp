#include <benchmark/benchmark.h>

#include "csbp/flow.hpp"
#include "csbp/lamperti.hpp"
#include "csbp/speed.hpp"

using namespace csbp;

namespace {

const BranchingMechanism& tempered() {
  static const auto m = parse_mechanism("kind=tempered-stable alpha=0.7 k=1 beta=0.5 sigma2=0.3 b=-1");
  return m;
}

void BM_Varphi(benchmark::State& st) {
  double l = 0.1;
  for (auto _ : st) {
    benchmark::DoNotOptimize(tempered().varphi(l));
    l = l < 100 ? l * 1.01 : 0.1;
  }
}
BENCHMARK(BM_Varphi);

void BM_CumulativeRateBuild(benchmark::State& st) {
  const auto m = parse_mechanism("kind=stable alpha=0.5 k=1").esscher_shift(1e-3);
  for (auto _ : st) benchmark::DoNotOptimize(CumulativeRate(m).explosive());
}
BENCHMARK(BM_CumulativeRateBuild)->Unit(benchmark::kMillisecond);

void BM_SolveUt(benchmark::State& st) {
  static const CumulativeRate cr(parse_mechanism("kind=stable alpha=0.5 k=1"));
  double t = 0.01;
  for (auto _ : st) {
    benchmark::DoNotOptimize(cr.solve_ut(t, 1.0).u);
    t = t < 10 ? t * 1.03 : 0.01;
  }
}
BENCHMARK(BM_SolveUt);

void BM_Philox(benchmark::State& st) {
  PhiloxStream s(1, 0, StreamRole::jumps);
  for (auto _ : st) benchmark::DoNotOptimize(s.uniform());
}
BENCHMARK(BM_Philox);

// one replication of the 4-level passage experiment at relative cutoff eta
void BM_PassageReplication(benchmark::State& st) {
  static const auto base = parse_mechanism("kind=stable alpha=0.5 k=1");
  SimPolicy p;
  p.T = kInf;
  p.delta = 1e-6;
  p.eta = 1e-3;
  CoupledSimulator sim(base, {1.0 / 64, 1.0 / 256, 1.0 / 1024, 1.0 / 4096}, p);
  std::uint32_t r = 0;
  for (auto _ : st) {
    std::vector<ClockAccumulator> c;
    for (double y : {3.0, 4.0, 5.0, 6.0}) {
      ClockSpec spec;
      spec.log_targets = {y};
      c.emplace_back(spec, 1.0);
    }
    ClockSet set(std::move(c));
    sim.set_replication(r++);
    benchmark::DoNotOptimize(sim.run(1.0, set).proposals);
  }
}
BENCHMARK(BM_PassageReplication)->Unit(benchmark::kMicrosecond);

void BM_FixedHorizonFamily(benchmark::State& st) {
  static const auto lad =
      EsscherLadder::from_spec(parse_mechanism("kind=stable alpha=0.5 k=1"), "power:2", static_cast<int>(st.range(0)));
  SimPolicy p;
  p.delta = 1e-4;
  std::uint32_t r = 0;
  for (auto _ : st) {
    p.replication = r++;
    benchmark::DoNotOptimize(simulate_coupled(lad, 1.0, p).times.size());
  }
}
BENCHMARK(BM_FixedHorizonFamily)->Arg(8)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
