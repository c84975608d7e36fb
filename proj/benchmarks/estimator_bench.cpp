#include <benchmark/benchmark.h>

#include <random>

#include "netoffload/workload.hpp"

using namespace netoffload;

namespace {

std::vector<double> stamps(std::size_t n) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> gap(1000.0);
  std::vector<double> out(n);
  double t = 0.0;
  for (auto& s : out) s = t += gap(rng);
  return out;
}

void BM_RecordArrival(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto ts = stamps(1 << 16);
  for (auto _ : state) {
    EstimatorState s(k);
    for (double t : ts) s.record_arrival(t);
    benchmark::DoNotOptimize(s.mean_arrival_rate());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ts.size()));
}
BENCHMARK(BM_RecordArrival)->RangeMultiplier(8)->Range(8, 4096);

// Rate read after each arrival: constant with the running sum, linear in k
// with the rescan.
void BM_RateIncremental(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  EstimatorState s(k);
  for (double t : stamps(k)) s.record_arrival(t);
  for (auto _ : state) benchmark::DoNotOptimize(s.mean_arrival_rate());
}
BENCHMARK(BM_RateIncremental)->RangeMultiplier(8)->Range(8, 4096);

void BM_RateRescan(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  EstimatorState s(k);
  for (double t : stamps(k)) s.record_arrival(t);
  for (auto _ : state) benchmark::DoNotOptimize(s.mean_arrival_rate_rescan());
}
BENCHMARK(BM_RateRescan)->RangeMultiplier(8)->Range(8, 4096);

}  // namespace
