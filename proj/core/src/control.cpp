#include "netoffload/control.hpp"

#include "netoffload/error.hpp"

namespace netoffload {

std::optional<StrategyKind> parse_strategy(std::string_view name) {
  if (name == "none") return StrategyKind::none;
  if (name == "passive") return StrategyKind::passive;
  if (name == "proactive") return StrategyKind::proactive;
  return std::nullopt;
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::none: return "none";
    case StrategyKind::passive: return "passive";
    case StrategyKind::proactive: return "proactive";
  }
  return "?";
}

bool NeighborLoadTable::update(NodeId neighbor, double normalized_load, double as_of) {
  auto it = entries_.find(neighbor);
  if (it != entries_.end() && !(as_of > it->second.as_of)) return false;
  entries_[neighbor] = {normalized_load, as_of};
  return true;
}

std::optional<NeighborLoad> NeighborLoadTable::get(NodeId neighbor) const {
  if (auto it = entries_.find(neighbor); it != entries_.end()) return it->second;
  return std::nullopt;
}

AdmissionDecision decide_none(double node_load, double capacity_threshold) {
  return node_load < capacity_threshold ? AdmissionDecision::execute() : AdmissionDecision::drop();
}

AdmissionDecision decide_passive(double node_load, double capacity_threshold, NodeId node, const Topology& topology,
                                 bool server_executes) {
  if (node == topology.server()) return server_executes ? AdmissionDecision::execute() : AdmissionDecision::drop();
  if (node_load < capacity_threshold) return AdmissionDecision::execute();
  const NodeId next = topology.next_hop(node);
  if (next == topology.server() && !server_executes) return AdmissionDecision::drop();
  return AdmissionDecision::forward_to(next);
}

ProactiveDecision decide_proactive(const EstimatorState& state, const NeighborLoadTable& neighbors,
                                   double cpu_capacity, double mem_capacity, double draw, int ttl_remaining,
                                   bool local_feasible) {
  if (!(draw >= 0.0 && draw <= 1.0)) throw PreconditionError("uniform draw must lie in [0, 1]");
  const double q = execution_probability(state, cpu_capacity, mem_capacity);
  if (draw < q) return {AdmissionDecision::execute(), q};
  if (ttl_remaining <= 0) return {local_feasible ? AdmissionDecision::execute() : AdmissionDecision::drop(), q};
  if (const auto target = lightest_load_neighbor(neighbors)) return {AdmissionDecision::forward_to(*target), q};
  return {AdmissionDecision::drop(), q};
}

std::optional<NodeId> lightest_load_neighbor(const NeighborLoadTable& table) {
  std::optional<NodeId> best;
  double best_load = 0.0;
  // Map iteration is ascending by id, so strict < keeps the lowest id on ties.
  for (const auto& [id, entry] : table.entries()) {
    if (!best || entry.normalized_load < best_load) {
      best = id;
      best_load = entry.normalized_load;
    }
  }
  return best;
}

std::vector<LoadGossip> publish_load(const Topology& topology, NodeId node, double normalized_load, double now) {
  std::vector<LoadGossip> out;
  for (const auto& nb : topology.neighbors(node))
    out.push_back({node, nb.id, normalized_load, now, now + nb.delay_ms / 1000.0});
  return out;
}

}  // namespace netoffload
