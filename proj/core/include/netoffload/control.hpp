#pragma once

#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "netoffload/topology.hpp"
#include "netoffload/workload.hpp"

namespace netoffload {

enum class StrategyKind { none, passive, proactive };

std::optional<StrategyKind> parse_strategy(std::string_view name);
std::string_view to_string(StrategyKind kind);

struct NeighborLoad {
  double normalized_load = 0.0;
  double as_of = 0.0;  // seconds
};

// One-hop view of neighbor loads, ordered by node id.
class NeighborLoadTable {
 public:
  // Overwrites only when as_of is newer than the stored entry. Returns whether
  // the entry changed.
  bool update(NodeId neighbor, double normalized_load, double as_of);
  void erase(NodeId neighbor) { entries_.erase(neighbor); }
  std::optional<NeighborLoad> get(NodeId neighbor) const;
  const std::map<NodeId, NeighborLoad>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::map<NodeId, NeighborLoad> entries_;
};

struct AdmissionDecision {
  enum class Kind { execute, forward, drop };
  Kind kind = Kind::drop;
  NodeId target = -1;  // forward only

  static AdmissionDecision execute() { return {Kind::execute, -1}; }
  static AdmissionDecision forward_to(NodeId node) { return {Kind::forward, node}; }
  static AdmissionDecision drop() { return {Kind::drop, -1}; }

  bool operator==(const AdmissionDecision&) const = default;
};

// Execute while load < threshold; overloaded (load >= threshold) drops.
AdmissionDecision decide_none(double node_load, double capacity_threshold);

// Execute while under threshold, otherwise pass along the path to the server.
// The last in-network hop drops unless the server executes requests.
AdmissionDecision decide_passive(double node_load, double capacity_threshold, NodeId node, const Topology& topology,
                                 bool server_executes = false);

struct ProactiveDecision {
  AdmissionDecision decision;
  double q = 1.0;
};

// Execute iff draw < q. Otherwise forward to the lightest neighbor in the
// table. With the TTL spent the request stays here when local_feasible and is
// dropped otherwise; with no neighbor at all it is dropped.
ProactiveDecision decide_proactive(const EstimatorState& state, const NeighborLoadTable& neighbors,
                                   double cpu_capacity, double mem_capacity, double draw, int ttl_remaining,
                                   bool local_feasible);

// Minimum normalized load, ties to the lowest id; nullopt for an empty table.
std::optional<NodeId> lightest_load_neighbor(const NeighborLoadTable& table);

struct LoadGossip {
  NodeId from = 0;
  NodeId to = 0;
  double normalized_load = 0.0;
  double as_of = 0.0;       // seconds
  double deliver_at = 0.0;  // seconds, as_of + link delay
};

// One message per one-hop neighbor, delivered after the link delay.
std::vector<LoadGossip> publish_load(const Topology& topology, NodeId node, double normalized_load, double now);

}  // namespace netoffload
