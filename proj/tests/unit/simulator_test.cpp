#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "netoffload/error.hpp"
#include "netoffload/simulator.hpp"

using namespace netoffload;

namespace {

std::shared_ptr<const Topology> two_nodes() {
  return std::make_shared<const Topology>(load_topology("nodes 2 server 1\n0 1 1 1\n1 1 1 0\n0 1 1\n"));
}

ScenarioConfig single_queue(double rate, double exec_time) {
  ScenarioConfig c;
  c.topology = two_nodes();
  c.services = ServiceCatalog({{0, exec_time, 0.001, 0.0, 1.0}});
  c.arrival_rate = rate;
  c.strategy.kind = StrategyKind::none;
  c.horizon = 2000.0;
  c.warmup = 100.0;
  c.sample_period_ms = 0.0;
  c.seed = 4;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

// Processor sharing at rho = 0.5: E[N] = rho / (1 - rho) = 1 and the mean
// sojourn is t / (1 - rho).
TEST(Simulator, ProcessorSharingMatchesMM1) {
  const auto m = run_scenario(single_queue(50.0, 0.01));
  const auto* n0 = m.node(0);
  ASSERT_NE(n0, nullptr);
  EXPECT_NEAR(n0->mean_concurrency, *expected_queue_length(0.5), 0.05);
  EXPECT_NEAR(m.phi_ms, 20.0, 1.0);
  EXPECT_EQ(m.dropped, 0u);
}

TEST(Simulator, ZeroArrivals) {
  auto c = single_queue(0.0, 0.01);
  c.horizon = 1.0;
  c.warmup = 0.0;
  c.sample_period_ms = 100.0;
  const auto m = run_scenario(c);
  EXPECT_EQ(m.total, 0u);
  EXPECT_DOUBLE_EQ(m.tau, 0.0);
  EXPECT_DOUBLE_EQ(m.psi, 0.0);
  EXPECT_DOUBLE_EQ(m.phi_ms, 0.0);
  EXPECT_EQ(m.series.size(), 11u);
  for (const auto& s : m.series) EXPECT_DOUBLE_EQ(s.normalized_load, 0.0);
}

TEST(Simulator, RejectsInvalidConfig) {
  auto c = single_queue(10.0, 0.01);
  c.warmup = 5000.0;
  EXPECT_THROW(run_scenario(c), ValidationError);
  c = single_queue(10.0, 0.01);
  c.preroll = -1.0;
  EXPECT_THROW(run_scenario(c), ValidationError);
  c = single_queue(10.0, 0.01);
  c.topology.reset();
  EXPECT_THROW(run_scenario(c), ValidationError);
}

// Property: every counted request ends executed or dropped, for every
// strategy and preset.
TEST(SimulatorProperty, Conservation) {
  for (const char* name : {"fig3", "overload-line", "overload-grid"}) {
    for (auto kind : {StrategyKind::none, StrategyKind::passive, StrategyKind::proactive}) {
      auto c = *preset_by_name(name, kind);
      c.horizon = std::min(c.horizon, 2.0);
      c.seed = 3;
      const auto m = run_scenario(c);
      EXPECT_EQ(m.total, m.executed + m.dropped) << name << " " << to_string(kind);
      EXPECT_GE(m.psi, 0.0);
      EXPECT_LE(m.psi, 1.0);
      for (const auto& s : m.series) EXPECT_GE(s.normalized_load, 0.0);
    }
  }
}

TEST(SimulatorProperty, NoneNeverForwards) {
  auto c = preset_overload_line(StrategyKind::none);
  c.horizon = 2.0;
  const auto m = run_scenario(c);
  EXPECT_EQ(m.forwarded, 0u);
  EXPECT_GT(m.dropped, 0u);
}

TEST(SimulatorProperty, SameSeedSameMetrics) {
  auto c = preset_fig3(StrategyKind::proactive);
  c.seed = 12;
  EXPECT_EQ(series_csv(run_scenario(c)), series_csv(run_scenario(c)));
  EXPECT_EQ(summary_csv(run_scenario(c)), summary_csv(run_scenario(c)));
  auto d = c;
  d.seed = 13;
  EXPECT_NE(series_csv(run_scenario(c)), series_csv(run_scenario(d)));
}

TEST(Simulator, PrerollIsNotMeasured) {
  auto c = single_queue(100.0, 0.005);
  c.horizon = 10.0;
  c.warmup = 0.0;
  c.sample_period_ms = 10.0;
  const auto base = run_scenario(c);
  c.preroll = 5.0;
  const auto rolled = run_scenario(c);
  // Arrivals are only counted from t = 0, so counts stay near rate x horizon.
  EXPECT_NEAR(static_cast<double>(rolled.total), 1000.0, 4.0 * std::sqrt(1000.0));
  EXPECT_EQ(rolled.series.size(), base.series.size());
  for (const auto& s : rolled.series) EXPECT_GE(s.time_ms, 0.0);
}

TEST(Simulator, Fig3ServerExecutesWhatNodesDecline) {
  const auto m = run_scenario(preset_fig3(StrategyKind::passive));
  EXPECT_EQ(m.dropped, 0u);
  EXPECT_GT(m.executed_at_server, 0u);
  EXPECT_EQ(m.node(kFig3Client), nullptr);  // relays only
  EXPECT_NE(m.node(kFig3N1), nullptr);
}

TEST(Simulator, ProactiveTtlZeroNeverForwards) {
  auto c = preset_overload_line(StrategyKind::proactive);
  c.horizon = 2.0;
  c.strategy.ttl = 0;
  EXPECT_EQ(run_scenario(c).forwarded, 0u);
}

TEST(Export, CsvHeadersAndStability) {
  const auto dir = std::filesystem::temp_directory_path() / "netoffload_export_test";
  std::filesystem::remove_all(dir);
  auto c = preset_fig3(StrategyKind::proactive);
  const auto m = run_scenario(c);
  const auto paths = export_metrics(m, MetricsFormat::csv, dir / "a");
  export_metrics(run_scenario(c), MetricsFormat::csv, dir / "b");
  ASSERT_EQ(paths.size(), 2u);
  for (const auto& p : paths) EXPECT_EQ(slurp(p), slurp(dir / "b" / p.filename()));
  EXPECT_EQ(slurp(dir / "a" / "series.csv").rfind("time_ms,node_id,normalized_load\n", 0), 0u);
  std::filesystem::remove_all(dir);
}

TEST(Export, EmptySeriesIsHeaderOnly) {
  auto c = single_queue(0.0, 0.01);
  c.horizon = 1.0;
  c.warmup = 0.0;
  c.sample_period_ms = 0.0;
  EXPECT_EQ(series_csv(run_scenario(c)), "time_ms,node_id,normalized_load\n");
}

TEST(Export, JsonMatchesCsvCounts) {
  const auto m = run_scenario(preset_fig3(StrategyKind::passive));
  const auto j = metrics_to_json(m);
  EXPECT_EQ(j.dump().find("NaN"), std::string::npos);
  EXPECT_EQ(j.at("series").size(), m.series.size());
}

TEST(ScenarioJson, RoundTripPreset) {
  const auto c = preset_overload_grid(StrategyKind::passive);
  const auto j = scenario_to_json(c);
  const auto again = scenario_from_json(j);
  EXPECT_EQ(scenario_to_json(again), j);
}

TEST(ScenarioJson, DataFilesLoad) {
  const std::filesystem::path dir = std::filesystem::path(NETOFFLOAD_DATA_DIR) / "scenarios";
  for (const char* f : {"line_file.json", "grid_jitter.json", "scale_free.json"}) {
    const auto c = load_scenario_file(dir / f);
    EXPECT_NO_THROW(c.validate()) << f;
  }
}

TEST(ScenarioJson, UnknownStrategyIsValidationError) {
  auto j = scenario_to_json(preset_fig3());
  j["strategy"] = "greedy";
  EXPECT_THROW(scenario_from_json(j), ValidationError);
}
