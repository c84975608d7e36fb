#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace netoffload {

using NodeId = int;

struct NodeSpec {
  NodeId id = 0;
  double cpu_capacity = 1.0;  // c'
  double mem_capacity = 1.0;  // m'
  bool is_access_point = false;
  bool is_server = false;
};

struct LinkSpec {
  NodeId u = 0;
  NodeId v = 0;
  double delay_ms = 1.0;  // one-way propagation
};

struct Neighbor {
  NodeId id;
  double delay_ms;
};

// Immutable network model. Node ids are dense, 0..N-1. The constructor
// validates capacities, links, the single-server rule and connectivity, then
// precomputes the next-hop table toward the server, all-pairs path delays and
// the hop diameter.
class Topology {
 public:
  Topology(std::vector<NodeSpec> nodes, std::vector<LinkSpec> links);

  std::size_t size() const { return nodes_.size(); }
  const NodeSpec& node(NodeId id) const;
  std::span<const NodeSpec> nodes() const { return nodes_; }
  std::span<const LinkSpec> links() const { return links_; }
  // Sorted by neighbor id.
  std::span<const Neighbor> neighbors(NodeId id) const;

  NodeId server() const { return server_; }
  std::vector<NodeId> access_points() const;

  // Throws PreconditionError for the server itself.
  NodeId next_hop(NodeId id) const;
  int hops_to_server(NodeId id) const;
  // Shortest-path delay between any two nodes, in milliseconds.
  double path_delay_ms(NodeId from, NodeId to) const;
  // Longest shortest path, counted in hops.
  int diameter() const { return diameter_; }
  double link_delay_ms(NodeId a, NodeId b) const;

 private:
  void check_id(NodeId id) const;

  std::vector<NodeSpec> nodes_;
  std::vector<LinkSpec> links_;
  std::vector<std::vector<Neighbor>> adjacency_;
  NodeId server_ = -1;
  std::vector<NodeId> next_hop_;
  std::vector<int> hops_;
  std::vector<double> delay_matrix_;  // row-major N x N
  int diameter_ = 0;
};

NodeId next_hop_toward_server(const Topology& topology, NodeId node);

// Edge-list text: "nodes N server S", N lines "id cpu mem access_flag",
// then "u v delay_ms" lines. '#' starts a comment line.
Topology load_topology(std::string_view text);
Topology load_topology_file(const std::filesystem::path& path);
std::string to_edge_list(const Topology& topology);

enum class TopologyKind { line, grid, tree, scale_free };

std::optional<TopologyKind> parse_topology_kind(std::string_view name);
std::string_view to_string(TopologyKind kind);

struct GeneratorParams {
  int size = 0;       // line, scale_free: node count
  int width = 0;      // grid
  int height = 0;     // grid
  int branching = 2;  // tree
  int depth = 0;      // tree: levels below the root
  int attach = 1;     // scale_free: edges added per new node
  std::optional<int> access_points;  // scale_free: sampled AP count
  double cpu_capacity = 1.0;
  double mem_capacity = 1.0;
  double delay_ms = 1.0;
};

Topology generate_topology(TopologyKind kind, const GeneratorParams& params, std::uint64_t seed);

}  // namespace netoffload
