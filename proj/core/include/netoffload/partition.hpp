#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace netoffload {

// Tag that keeps a class on the device.
inline constexpr std::string_view kPinnedTag = "pinned";

struct MethodProfile {
  std::string name;
  double invocations = 0.0;  // raw count, normalized per class into f_m
  double t_local = 0.0;      // seconds
  std::optional<double> cpu_scale_hint;  // per-method speedup override
  double in_bytes = 0.0;
  double out_bytes = 0.0;
  double energy_local = 0.0;  // joules
  // Forces the boundary flag; otherwise it follows the class's cut edges.
  std::optional<bool> boundary;
};

struct ClassVertex {
  std::string name;
  std::set<std::string> tags;
  std::vector<MethodProfile> methods;

  bool pinned() const { return tags.contains(std::string(kPinnedTag)); }
};

// Endpoints stored with a < b.
struct CallEdge {
  int a = 0;
  int b = 0;
  double weight = 0.0;
};

using EdgeKey = std::pair<int, int>;

// Undirected weighted call graph between app classes. Vertex indices follow
// insertion order. Parallel edges merge by summing weights.
class CallGraph {
 public:
  // Throws ValidationError on a duplicate or empty name.
  int add_class(ClassVertex vertex);
  // Throws ValidationError on unknown classes, self-edges and weights that
  // are negative or not finite. Zero-weight edges are ignored.
  void add_edge(std::string_view a, std::string_view b, double weight);
  void add_edge(int a, int b, double weight);

  int size() const { return static_cast<int>(vertices_.size()); }
  const ClassVertex& vertex(int i) const { return vertices_.at(static_cast<std::size_t>(i)); }
  ClassVertex& vertex(int i) { return vertices_.at(static_cast<std::size_t>(i)); }
  const std::vector<ClassVertex>& vertices() const { return vertices_; }
  // Sorted by (a, b).
  std::vector<CallEdge> edges() const;
  std::optional<int> index_of(std::string_view name) const;
  // (neighbor, weight), ascending neighbor.
  const std::map<int, double>& adjacent(int i) const { return adjacency_.at(static_cast<std::size_t>(i)); }
  double total_weight() const;

 private:
  std::vector<ClassVertex> vertices_;
  std::vector<std::map<int, double>> adjacency_;
  std::map<std::string, int, std::less<>> index_;
};

CallGraph call_graph_from_json(const nlohmann::json& doc);
CallGraph load_call_graph(const std::filesystem::path& path);
nlohmann::json call_graph_to_json(const CallGraph& graph);

struct TagRule {
  std::string prefix;  // dotted package prefix, matched on whole segments
  std::string tag;
};

// Accepts [{prefix, tag}, ...] or {"rules": [...]}.
std::vector<TagRule> tag_rules_from_json(const nlohmann::json& doc);
std::vector<TagRule> load_tag_rules(const std::filesystem::path& path);

// "a.b" matches "a.b" and "a.b.C" but not "a.bc".
bool prefix_matches(std::string_view prefix, std::string_view name);
// The tag of the longest matching prefix, if any. Equal-length matches
// resolve to the first rule listed.
std::optional<std::string> match_tag(const std::vector<TagRule>& rules, std::string_view name);
CallGraph apply_tag_rules(CallGraph graph, const std::vector<TagRule>& rules);

enum class PathMetric {
  hops,            // unweighted shortest paths
  inverse_weight,  // edge length 1 / weight
};

// Brandes accumulation over unordered vertex pairs; a pair's unit of flow is
// split evenly across its shortest paths.
std::map<EdgeKey, double> edge_betweenness(const CallGraph& graph, PathMetric metric = PathMetric::hops);

struct PartitionSet {
  std::vector<std::vector<int>> clusters;  // each ascending, ordered by first member
  int n_clusters = 0;
  double modularity = 0.0;
  std::vector<bool> offloadable;  // per cluster: no pinned member
};

// Weighted Newman modularity. Throws ValidationError unless clusters cover
// every vertex exactly once. A graph without edges has Q = 0.
double modularity(const CallGraph& graph, const std::vector<std::vector<int>>& clusters);

// Canonical ordering plus modularity and offloadable flags.
PartitionSet make_partition_set(const CallGraph& graph, std::vector<std::vector<int>> clusters);

struct GirvanNewmanOptions {
  PathMetric metric = PathMetric::hops;
  double tie_tolerance = 1e-9;  // relative; ties go to the smallest (a, b)
};

struct GirvanNewmanTrace {
  std::vector<EdgeKey> removed;         // in removal order
  std::vector<PartitionSet> snapshots;  // one per component count reached
};

// Removes edges until max_clusters components exist (or edges run out).
// Betweenness is recomputed on the whole remaining graph after each removal.
GirvanNewmanTrace girvan_newman_trace(const CallGraph& graph, int max_clusters,
                                      const GirvanNewmanOptions& options = {});
// Throws ValidationError unless 1 <= n_clusters <= |V|. A disconnected graph
// never yields fewer clusters than its components.
PartitionSet girvan_newman(const CallGraph& graph, int n_clusters, const GirvanNewmanOptions& options = {});

struct LouvainOptions {
  double min_gain = 1e-12;  // a move must raise Q by more than this
};

PartitionSet louvain_optimal(const CallGraph& graph, const LouvainOptions& options = {});

struct PartitionEnumeration {
  int n_opt = 0;
  double louvain_modularity = 0.0;
  std::vector<PartitionSet> sets;  // ascending N, 2..n_opt
};

PartitionEnumeration enumerate_partition_sets(const CallGraph& graph, const GirvanNewmanOptions& gn = {},
                                              const LouvainOptions& louvain = {});

// Percentage of classes that sit in offloadable clusters.
double offloadable_fraction(const CallGraph& graph, const PartitionSet& partition);

nlohmann::json partition_set_to_json(const CallGraph& graph, const PartitionSet& partition);
nlohmann::json enumeration_to_json(const CallGraph& graph, const PartitionEnumeration& enumeration);

}  // namespace netoffload
