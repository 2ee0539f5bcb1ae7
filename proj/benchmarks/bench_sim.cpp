#include <benchmark/benchmark.h>

#include "ctsim/report.hpp"
#include "ctsim/sim.hpp"

namespace {

using namespace ctsim;

sim::WorldConfig nodes(int n, std::uint64_t seed) {
  sim::WorldConfig cfg;
  cfg.seed = seed;
  for (int i = 0; i < n; ++i) {
    sim::NodeSpec spec;
    spec.name = "n" + std::to_string(i);
    spec.stake = Fixed::ratio(1, n);
    cfg.nodes.push_back(spec);
  }
  return cfg;
}

// Simulated minute of an idle federation.
void BM_SimulateMinute(benchmark::State& state) {
  std::uint64_t blocks = 0;
  for (auto _ : state) {
    sim::World w(nodes(static_cast<int>(state.range(0)), 7));
    w.run_until(60'000);
    blocks += w.node(0).replica->height();
  }
  state.counters["blocks"] = benchmark::Counter(static_cast<double>(blocks),
                                                benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_SimulateMinute)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_VerifyLedger(benchmark::State& state) {
  sim::World w(nodes(4, 11));
  w.run_until(60'000);
  const ledger::LedgerFile file{w.params(), w.node(0).replica->chain().blocks()};
  for (auto _ : state) benchmark::DoNotOptimize(report::verify_ledger(file).ok);
  state.counters["blocks"] = static_cast<double>(file.blocks.size());
}
BENCHMARK(BM_VerifyLedger)->Unit(benchmark::kMillisecond);

}  // namespace
