#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "netoffload/control.hpp"
#include "netoffload/topology.hpp"
#include "netoffload/workload.hpp"

namespace netoffload {

struct StrategyConfig {
  StrategyKind kind = StrategyKind::proactive;
  std::size_t k = 128;
  std::optional<int> ttl;  // default: 2 x hop diameter
  double gossip_period_ms = 1.0;
  bool gossip_on_completion = true;
  // Proactive only. false: declined requests are dropped instead of forwarded.
  bool forwarding_enabled = true;
};

// What a proactive node does with a declined request once its TTL is spent.
enum class TtlFallback {
  cpu,     // execute when the CPU load is under the threshold, else drop
  memory,  // execute when the request's memory fits, else drop
};

struct ScenarioConfig {
  std::string name = "custom";
  std::shared_ptr<const Topology> topology;
  ServiceCatalog services;
  double arrival_rate = 1000.0;  // base lambda for the whole network, 1/s
  double load_multiplier = 1.0;
  std::vector<JitterSpec> jitters;
  StrategyConfig strategy;
  TtlFallback ttl_fallback = TtlFallback::cpu;
  double horizon = 1.0;          // seconds
  std::optional<double> warmup;  // seconds; default 10% of the horizon
  // Seconds simulated before t = 0 so estimators start warm. Nothing in the
  // pre-roll is measured or sampled.
  double preroll = 0.0;
  std::uint64_t seed = 1;
  double sample_period_ms = 1.0;  // 0 disables the load series
  double capacity_threshold = 1.0;
  bool server_executes = false;      // server acts as an infinite-capacity catch-all
  bool relay_access_points = false;  // access points only relay toward the server

  double effective_warmup() const { return warmup.value_or(0.1 * horizon); }
  int effective_ttl() const;
  // Throws ValidationError.
  void validate() const;
};

struct LoadSample {
  double time_ms = 0.0;
  NodeId node = 0;
  double normalized_load = 0.0;
};

struct NodeMetrics {
  NodeId node = 0;
  double mean_load = 0.0;         // time average over the measured window
  double mean_concurrency = 0.0;  // time average of running services
  double peak_load = 0.0;
  std::uint64_t executed = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;
  std::uint64_t proactive_decisions = 0;
  double mean_q = 1.0;
};

struct RunMetrics {
  double tau = 0.0;     // average normalized load across compute nodes
  double phi_ms = 0.0;  // average latency of executed requests
  double psi = 0.0;     // dropped / total
  std::uint64_t total = 0;
  std::uint64_t executed = 0;
  std::uint64_t executed_at_server = 0;
  std::uint64_t forwarded = 0;  // forwarding hops
  std::uint64_t dropped = 0;
  double window_start = 0.0;  // seconds
  double window_end = 0.0;
  std::vector<LoadSample> series;
  std::vector<NodeMetrics> nodes;  // compute nodes, ascending id

  const NodeMetrics* node(NodeId id) const;
};

RunMetrics run_scenario(const ScenarioConfig& config);

// Load of one node from the sampled series, restricted to [from_ms, to_ms).
std::vector<LoadSample> series_for(const RunMetrics& metrics, NodeId node, double from_ms, double to_ms);

// ---------------------------------------------------------------------------
// Presets

// client -> n1 -> n2 -> server at lambda = 1000/s with two 6x jitters of
// 10 ms at 40 ms and 70 ms; horizon 150 ms.
ScenarioConfig preset_fig3(StrategyKind strategy = StrategyKind::proactive);
// 4-node line at 8x the calibrated base load.
ScenarioConfig preset_overload_line(StrategyKind strategy = StrategyKind::proactive);
// 5x5 grid at 8x the calibrated base load.
ScenarioConfig preset_overload_grid(StrategyKind strategy = StrategyKind::proactive);
std::optional<ScenarioConfig> preset_by_name(std::string_view name, StrategyKind strategy);

// Node ids of the fig3 line.
inline constexpr NodeId kFig3Client = 0;
inline constexpr NodeId kFig3N1 = 1;
inline constexpr NodeId kFig3N2 = 2;
inline constexpr NodeId kFig3Server = 3;

// ---------------------------------------------------------------------------
// Config documents

// Relative topology/service file paths resolve against base_dir.
ScenarioConfig scenario_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario_file(const std::filesystem::path& path);
// Applies overrides present in doc on top of an existing config (used for
// "preset" + config combinations).
void apply_scenario_overrides(ScenarioConfig& config, const nlohmann::json& doc,
                              const std::filesystem::path& base_dir = {});
nlohmann::json scenario_to_json(const ScenarioConfig& config);

// ---------------------------------------------------------------------------
// Export

enum class MetricsFormat { csv, json };

// csv: series.csv (time_ms,node_id,normalized_load) and summary.csv.
// json: metrics.json with the same content. Returns the written paths.
std::vector<std::filesystem::path> export_metrics(const RunMetrics& metrics, MetricsFormat format,
                                                  const std::filesystem::path& destination);
std::string series_csv(const RunMetrics& metrics);
std::string summary_csv(const RunMetrics& metrics);
nlohmann::json metrics_to_json(const RunMetrics& metrics);

}  // namespace netoffload
