#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "netoffload/error.hpp"
#include "netoffload/simulator.hpp"

namespace netoffload {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::shared_ptr<const Topology> topology_from_json(const json& doc, const std::filesystem::path& base) {
  if (doc.contains("file")) return std::make_shared<const Topology>(load_topology_file(resolve(base, doc.at("file"))));
  if (doc.contains("edge_list")) return std::make_shared<const Topology>(load_topology(doc.at("edge_list").get<std::string>()));
  const auto kind_name = doc.at("kind").get<std::string>();
  const auto kind = parse_topology_kind(kind_name);
  if (!kind) throw ValidationError(fmt::format("unknown topology kind '{}'", kind_name));
  GeneratorParams p;
  p.size = doc.value("size", p.size);
  p.width = doc.value("width", p.width);
  p.height = doc.value("height", p.height);
  p.branching = doc.value("branching", p.branching);
  p.depth = doc.value("depth", p.depth);
  p.attach = doc.value("attach", p.attach);
  if (doc.contains("access_points")) p.access_points = doc.at("access_points").get<int>();
  p.cpu_capacity = doc.value("cpu_capacity", p.cpu_capacity);
  p.mem_capacity = doc.value("mem_capacity", p.mem_capacity);
  p.delay_ms = doc.value("delay_ms", p.delay_ms);
  return std::make_shared<const Topology>(generate_topology(*kind, p, doc.value("seed", std::uint64_t{1})));
}

void strategy_from_json(StrategyConfig& s, const json& doc) {
  if (doc.is_string()) {
    const auto kind = parse_strategy(doc.get<std::string>());
    if (!kind) throw ValidationError(fmt::format("unknown strategy '{}'", doc.get<std::string>()));
    s.kind = *kind;
    return;
  }
  if (doc.contains("kind")) {
    const auto name = doc.at("kind").get<std::string>();
    const auto kind = parse_strategy(name);
    if (!kind) throw ValidationError(fmt::format("unknown strategy '{}'", name));
    s.kind = *kind;
  }
  if (doc.contains("k")) s.k = doc.at("k").get<std::size_t>();
  if (doc.contains("ttl")) {
    if (doc.at("ttl").is_null())
      s.ttl.reset();
    else
      s.ttl = doc.at("ttl").get<int>();
  }
  s.gossip_period_ms = doc.value("gossip_period_ms", s.gossip_period_ms);
  s.gossip_on_completion = doc.value("gossip_on_completion", s.gossip_on_completion);
  s.forwarding_enabled = doc.value("forwarding_enabled", s.forwarding_enabled);
}

}  // namespace

void apply_scenario_overrides(ScenarioConfig& c, const json& doc, const std::filesystem::path& base) {
  if (!doc.is_object()) throw ValidationError("scenario config must be a JSON object");
  try {
    if (doc.contains("name")) c.name = doc.at("name").get<std::string>();
    if (doc.contains("topology")) c.topology = topology_from_json(doc.at("topology"), base);
    if (doc.contains("services")) c.services = catalog_from_json(doc.at("services"));
    if (doc.contains("services_file"))
      c.services = catalog_from_json(read_json_file(resolve(base, doc.at("services_file").get<std::string>())));
    if (doc.contains("arrival_rate")) c.arrival_rate = doc.at("arrival_rate").get<double>();
    if (doc.contains("load_multiplier")) c.load_multiplier = doc.at("load_multiplier").get<double>();
    if (doc.contains("jitters")) c.jitters = jitters_from_json(doc.at("jitters"));
    if (doc.contains("strategy")) strategy_from_json(c.strategy, doc.at("strategy"));
    if (doc.contains("ttl_fallback")) {
      const auto v = doc.at("ttl_fallback").get<std::string>();
      if (v == "cpu")
        c.ttl_fallback = TtlFallback::cpu;
      else if (v == "memory")
        c.ttl_fallback = TtlFallback::memory;
      else
        throw ValidationError(fmt::format("unknown ttl_fallback '{}'", v));
    }
    if (doc.contains("horizon_s")) c.horizon = doc.at("horizon_s").get<double>();
    if (doc.contains("warmup_s")) c.warmup = doc.at("warmup_s").get<double>();
    if (doc.contains("preroll_s")) c.preroll = doc.at("preroll_s").get<double>();
    if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("sample_period_ms")) c.sample_period_ms = doc.at("sample_period_ms").get<double>();
    if (doc.contains("capacity_threshold")) c.capacity_threshold = doc.at("capacity_threshold").get<double>();
    if (doc.contains("server_executes")) c.server_executes = doc.at("server_executes").get<bool>();
    if (doc.contains("relay_access_points")) c.relay_access_points = doc.at("relay_access_points").get<bool>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("scenario config: {}", e.what()));
  }
}

ScenarioConfig scenario_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ValidationError("scenario config must be a JSON object");
  if (!doc.contains("topology")) throw ValidationError("scenario config: missing 'topology'");
  if (!doc.contains("services") && !doc.contains("services_file"))
    throw ValidationError("scenario config: missing 'services'");
  ScenarioConfig c;
  apply_scenario_overrides(c, doc, base_dir);
  c.validate();
  return c;
}

ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path), path.parent_path());
}

json scenario_to_json(const ScenarioConfig& c) {
  json strategy = {{"kind", std::string(to_string(c.strategy.kind))},
                   {"k", c.strategy.k},
                   {"ttl", c.strategy.ttl ? json(*c.strategy.ttl) : json(nullptr)},
                   {"gossip_period_ms", c.strategy.gossip_period_ms},
                   {"gossip_on_completion", c.strategy.gossip_on_completion},
                   {"forwarding_enabled", c.strategy.forwarding_enabled}};
  json doc = {{"name", c.name},
              {"topology", {{"edge_list", c.topology ? to_edge_list(*c.topology) : std::string()}}},
              {"services", catalog_to_json(c.services)},
              {"arrival_rate", c.arrival_rate},
              {"load_multiplier", c.load_multiplier},
              {"jitters", jitters_to_json(c.jitters)},
              {"strategy", strategy},
              {"ttl_fallback", c.ttl_fallback == TtlFallback::cpu ? "cpu" : "memory"},
              {"horizon_s", c.horizon},
              {"warmup_s", c.effective_warmup()},
              {"preroll_s", c.preroll},
              {"seed", c.seed},
              {"sample_period_ms", c.sample_period_ms},
              {"capacity_threshold", c.capacity_threshold},
              {"server_executes", c.server_executes},
              {"relay_access_points", c.relay_access_points}};
  return doc;
}

// ---------------------------------------------------------------------------
// Presets

ScenarioConfig preset_fig3(StrategyKind strategy) {
  // client(0) - n1(1) - n2(2) - server(3), 1 ms links.
  std::vector<NodeSpec> nodes = {
      {kFig3Client, 1.0, 1.0, true, false},
      {kFig3N1, 1.0, 1.0, false, false},
      {kFig3N2, 1.0, 1.0, false, false},
      {kFig3Server, 1.0, 1.0, false, true},
  };
  std::vector<LinkSpec> links = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}};

  ScenarioConfig c;
  c.name = "fig3";
  c.topology = std::make_shared<const Topology>(std::move(nodes), std::move(links));
  // rho = 1000 * 0.6 ms = 0.6, l = 1.5 services, l * c_j / c' = 0.6 of n1.
  c.services = ServiceCatalog({{0, 0.0006, 0.4, 0.0, 1.0}});
  c.arrival_rate = 1000.0;
  c.jitters = {{0.040, 0.010, 6.0}, {0.070, 0.010, 6.0}};
  c.strategy.kind = strategy;
  c.strategy.k = 64;
  c.horizon = 0.150;
  // The plotted 150 ms follow half a second of steady traffic, so the
  // estimators are warm at t = 0 and no warm-up needs to be cut.
  c.preroll = 0.5;
  c.warmup = 0.0;
  c.sample_period_ms = 1.0;
  c.server_executes = true;
  c.relay_access_points = true;
  return c;
}

ScenarioConfig preset_overload_line(StrategyKind strategy) {
  GeneratorParams p;
  p.size = 4;
  ScenarioConfig c;
  c.name = "overload-line";
  c.topology = std::make_shared<const Topology>(generate_topology(TopologyKind::line, p, 1));
  c.services = ServiceCatalog({{0, 0.010, 0.5, 0.0, 1.0}});
  c.arrival_rate = 20.0;
  c.load_multiplier = 8.0;
  c.strategy.kind = strategy;
  c.strategy.k = 128;
  c.horizon = 20.0;
  c.sample_period_ms = 10.0;
  return c;
}

ScenarioConfig preset_overload_grid(StrategyKind strategy) {
  GeneratorParams p;
  p.width = 5;
  p.height = 5;
  ScenarioConfig c;
  c.name = "overload-grid";
  c.topology = std::make_shared<const Topology>(generate_topology(TopologyKind::grid, p, 1));
  c.services = ServiceCatalog({{0, 0.010, 0.5, 0.0, 1.0}});
  c.arrival_rate = 60.0;
  c.load_multiplier = 8.0;
  c.strategy.kind = strategy;
  c.strategy.k = 128;
  c.horizon = 20.0;
  c.sample_period_ms = 10.0;
  return c;
}

std::optional<ScenarioConfig> preset_by_name(std::string_view name, StrategyKind strategy) {
  if (name == "fig3") return preset_fig3(strategy);
  if (name == "overload-line") return preset_overload_line(strategy);
  if (name == "overload-grid") return preset_overload_grid(strategy);
  return std::nullopt;
}

}  // namespace netoffload
