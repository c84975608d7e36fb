#include "netoffload/decision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "netoffload/error.hpp"

namespace netoffload {

using nlohmann::json;

void NetworkConditions::validate() const {
  if (!(rtt >= 0.0) || !std::isfinite(rtt)) throw ValidationError("rtt must be a finite value >= 0");
  if (!(bandwidth > 0.0)) throw ValidationError("bandwidth must be > 0");
  if (!(cpu_speedup > 0.0) || !std::isfinite(cpu_speedup)) throw ValidationError("cpu speedup must be > 0");
}

void EnergyModel::validate() const {
  if (!(energy_per_tx_byte >= 0.0) || !(energy_per_rx_byte >= 0.0) || !(energy_idle_per_second >= 0.0))
    throw ValidationError("energy model coefficients must be >= 0");
}

EnergyModel energy_model_from_json(const json& doc) {
  EnergyModel m;
  try {
    m.energy_per_tx_byte = doc.value("energy_per_tx_byte", 0.0);
    m.energy_per_rx_byte = doc.value("energy_per_rx_byte", 0.0);
    m.energy_idle_per_second = doc.value("energy_idle_per_second", 0.0);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("energy model: {}", e.what()));
  }
  m.validate();
  return m;
}

EnergyModel load_energy_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  try {
    return energy_model_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void LatencyWindow::push(double rtt, double now) {
  if (!(rtt >= 0.0) || !std::isfinite(rtt)) throw ValidationError("rtt sample must be a finite value >= 0");
  samples_.push_back(rtt);
  if (samples_.size() > kCapacity) samples_.pop_front();
  last_update_ = now;
}

std::optional<double> LatencyWindow::estimate() const {
  if (samples_.empty()) return std::nullopt;
  return std::accumulate(samples_.begin(), samples_.end(), 0.0) / static_cast<double>(samples_.size());
}

LatencyWindow update_latency_window(LatencyWindow window, double sample_rtt, double now) {
  window.push(sample_rtt, now);
  return window;
}

std::vector<double> ClassProfile::frequencies() const {
  std::vector<double> f(methods.size(), 0.0);
  if (methods.empty()) return f;
  double total = 0.0;
  for (const auto& m : methods) total += m.invocations;
  for (std::size_t i = 0; i < methods.size(); ++i)
    f[i] = total > 0.0 ? methods[i].invocations / total : 1.0 / static_cast<double>(methods.size());
  return f;
}

ClassProfile class_profile(const CallGraph& graph, int vertex, const std::vector<bool>& remote) {
  const auto& v = graph.vertex(vertex);
  const bool side = remote.at(static_cast<std::size_t>(vertex));
  bool crosses = false;
  for (const auto& [other, _] : graph.adjacent(vertex))
    if (remote.at(static_cast<std::size_t>(other)) != side) crosses = true;
  ClassProfile p{v.name, v.methods, {}};
  for (const auto& m : v.methods) p.boundary.push_back(m.boundary.value_or(crosses));
  return p;
}

double offload_time(const MethodProfile& method, const NetworkConditions& cond) {
  return method.t_local / method.cpu_scale_hint.value_or(cond.cpu_speedup);
}

bool class_valid_time(const ClassProfile& profile, const NetworkConditions& cond) {
  if (profile.methods.empty()) return false;
  const auto f = profile.frequencies();
  double local = 0.0;
  double remote = 0.0;
  for (std::size_t i = 0; i < profile.methods.size(); ++i) {
    const auto& m = profile.methods[i];
    local += f[i] * m.t_local;
    double cost = offload_time(m, cond);
    if (profile.boundary.at(i)) cost += cond.rtt + (m.in_bytes + m.out_bytes) / cond.bandwidth;
    remote += f[i] * cost;
  }
  return local > remote;
}

bool class_valid_energy(const ClassProfile& profile, const NetworkConditions& cond, const EnergyModel& model) {
  if (profile.methods.empty()) return false;
  const auto f = profile.frequencies();
  double local = 0.0;
  double remote = 0.0;
  for (std::size_t i = 0; i < profile.methods.size(); ++i) {
    const auto& m = profile.methods[i];
    local += f[i] * m.energy_local;
    if (!profile.boundary.at(i)) continue;
    const double wait = cond.rtt + (m.in_bytes + m.out_bytes) / cond.bandwidth + offload_time(m, cond);
    remote += f[i] * (m.in_bytes * model.energy_per_tx_byte + m.out_bytes * model.energy_per_rx_byte +
                      wait * model.energy_idle_per_second);
  }
  return local > remote;
}

namespace {

struct ClusterOutcome {
  bool passes = false;
  std::vector<ClassValidity> classes;
};

ClusterOutcome evaluate_cluster(const std::vector<int>& cluster, const CallGraph& graph,
                                const NetworkConditions& cond, const EnergyModel& model) {
  std::vector<bool> remote(static_cast<std::size_t>(graph.size()), false);
  for (const int v : cluster) remote[static_cast<std::size_t>(v)] = true;
  ClusterOutcome out{true, {}};
  for (const int v : cluster) {
    const auto profile = class_profile(graph, v, remote);
    ClassValidity cv{v, class_valid_time(profile, cond), class_valid_energy(profile, cond, model)};
    out.passes = out.passes && cv.valid();
    out.classes.push_back(cv);
  }
  return out;
}

}  // namespace

OffloadVerdict select_partition(const std::vector<PartitionSet>& sets, const CallGraph& graph,
                                const NetworkConditions& cond, const EnergyModel& model, SetValidity mode) {
  cond.validate();
  model.validate();
  OffloadVerdict verdict;
  if (sets.empty() || graph.size() == 0) return verdict;

  for (const auto& set : sets) {
    std::vector<int> chosen;
    std::vector<ClassValidity> evaluated;
    std::size_t candidates = 0;
    std::size_t passed = 0;
    for (std::size_t c = 0; c < set.clusters.size(); ++c) {
      if (!set.offloadable[c]) continue;
      ++candidates;
      auto outcome = evaluate_cluster(set.clusters[c], graph, cond, model);
      evaluated.insert(evaluated.end(), outcome.classes.begin(), outcome.classes.end());
      if (outcome.passes) {
        ++passed;
        chosen.insert(chosen.end(), set.clusters[c].begin(), set.clusters[c].end());
      }
    }
    const bool qualifies = mode == SetValidity::any ? passed > 0 : candidates > 0 && passed == candidates;
    if (!qualifies) continue;
    std::sort(chosen.begin(), chosen.end());
    std::sort(evaluated.begin(), evaluated.end(), [](const auto& a, const auto& b) { return a.vertex < b.vertex; });
    verdict.chosen_n = set.n_clusters;
    verdict.offload_classes = std::move(chosen);
    verdict.per_class = std::move(evaluated);
    return verdict;
  }

  // Per-class fallback: every class is its own cluster.
  for (int v = 0; v < graph.size(); ++v) {
    if (graph.vertex(v).pinned()) continue;
    auto outcome = evaluate_cluster({v}, graph, cond, model);
    verdict.per_class.push_back(outcome.classes.front());
    if (outcome.passes) verdict.offload_classes.push_back(v);
  }
  if (!verdict.offload_classes.empty()) {
    verdict.chosen_n = graph.size();
    verdict.per_class_fallback = true;
  }
  return verdict;
}

json verdict_to_json(const CallGraph& graph, const OffloadVerdict& verdict) {
  json classes = json::array();
  for (const int v : verdict.offload_classes) classes.push_back(graph.vertex(v).name);
  json validity = json::object();
  for (const auto& cv : verdict.per_class)
    validity[graph.vertex(cv.vertex).name] = {{"time", cv.time}, {"energy", cv.energy}, {"valid", cv.valid()}};
  return {{"chosen_N", verdict.chosen_n ? json(*verdict.chosen_n) : json(nullptr)},
          {"local_only", verdict.local_only()},
          {"per_class_fallback", verdict.per_class_fallback},
          {"offload_classes", std::move(classes)},
          {"per_class_validity", std::move(validity)}};
}

}  // namespace netoffload
