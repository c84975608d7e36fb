#include "netoffload/topology.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

#include <fmt/format.h>

#include "netoffload/error.hpp"

namespace netoffload {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PathKey {
  double delay;
  int hops;
  bool operator<(const PathKey& o) const {
    if (delay != o.delay) return delay < o.delay;
    return hops < o.hops;
  }
};

// Dijkstra on (delay, hops) lexicographic order. parent[v] is the lowest-id
// neighbor that achieves the optimum, which gives deterministic next hops.
void shortest_paths(const std::vector<std::vector<Neighbor>>& adj, NodeId source,
                    std::vector<PathKey>& best, std::vector<NodeId>* parent) {
  const auto n = adj.size();
  best.assign(n, PathKey{kInf, std::numeric_limits<int>::max()});
  if (parent) parent->assign(n, -1);
  using Item = std::tuple<double, int, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  best[source] = {0.0, 0};
  pq.emplace(0.0, 0, source);
  std::vector<bool> done(n, false);
  while (!pq.empty()) {
    auto [d, h, u] = pq.top();
    pq.pop();
    if (done[u]) continue;
    done[u] = true;
    for (const auto& nb : adj[u]) {
      const PathKey cand{d + nb.delay_ms, h + 1};
      auto& cur = best[nb.id];
      if (cand < cur) {
        cur = cand;
        if (parent) (*parent)[nb.id] = u;
        pq.emplace(cand.delay, cand.hops, nb.id);
      } else if (parent && !done[nb.id] && !(cur < cand) && u < (*parent)[nb.id]) {
        (*parent)[nb.id] = u;
      }
    }
  }
}

std::vector<int> bfs_hops(const std::vector<std::vector<Neighbor>>& adj, NodeId source) {
  std::vector<int> dist(adj.size(), -1);
  std::queue<NodeId> q;
  dist[source] = 0;
  q.push(source);
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop();
    for (const auto& nb : adj[u]) {
      if (dist[nb.id] < 0) {
        dist[nb.id] = dist[u] + 1;
        q.push(nb.id);
      }
    }
  }
  return dist;
}

}  // namespace

Topology::Topology(std::vector<NodeSpec> nodes, std::vector<LinkSpec> links)
    : nodes_(std::move(nodes)), links_(std::move(links)) {
  if (nodes_.empty()) throw ValidationError("no nodes");
  const auto n = nodes_.size();
  std::sort(nodes_.begin(), nodes_.end(), [](const NodeSpec& a, const NodeSpec& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < n; ++i) {
    const auto& spec = nodes_[i];
    if (spec.id != static_cast<NodeId>(i))
      throw ValidationError(fmt::format("node ids must be dense 0..{}; found id {}", n - 1, spec.id));
    if (!(spec.cpu_capacity > 0.0))
      throw ValidationError(fmt::format("non-positive cpu capacity at node {}", spec.id));
    if (!(spec.mem_capacity > 0.0))
      throw ValidationError(fmt::format("non-positive memory capacity at node {}", spec.id));
    if (spec.is_server) {
      if (server_ >= 0) throw ValidationError(fmt::format("multiple servers: {} and {}", server_, spec.id));
      server_ = spec.id;
    }
  }
  if (server_ < 0) throw ValidationError("missing server");

  adjacency_.assign(n, {});
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const auto& link : links_) {
    if (link.u < 0 || link.v < 0 || static_cast<std::size_t>(link.u) >= n || static_cast<std::size_t>(link.v) >= n)
      throw ValidationError(fmt::format("link {}-{} references an unknown node", link.u, link.v));
    if (link.u == link.v) throw ValidationError(fmt::format("self-loop at node {}", link.u));
    if (!(link.delay_ms >= 0.0)) throw ValidationError(fmt::format("negative delay on link {}-{}", link.u, link.v));
    const auto key = std::minmax(link.u, link.v);
    if (!seen.insert(key).second) throw ValidationError(fmt::format("duplicate link {}-{}", key.first, key.second));
    adjacency_[link.u].push_back({link.v, link.delay_ms});
    adjacency_[link.v].push_back({link.u, link.delay_ms});
  }
  for (auto& row : adjacency_)
    std::sort(row.begin(), row.end(), [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; });

  std::vector<PathKey> best;
  std::vector<NodeId> parent;
  shortest_paths(adjacency_, server_, best, &parent);
  for (std::size_t v = 0; v < n; ++v)
    if (best[v].delay == kInf) throw ValidationError(fmt::format("disconnected graph: node {} cannot reach the server", v));
  next_hop_ = parent;
  hops_.resize(n);
  for (std::size_t v = 0; v < n; ++v) hops_[v] = best[v].hops;

  delay_matrix_.assign(n * n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    shortest_paths(adjacency_, static_cast<NodeId>(s), best, nullptr);
    for (std::size_t t = 0; t < n; ++t) delay_matrix_[s * n + t] = best[t].delay;
    const auto hops = bfs_hops(adjacency_, static_cast<NodeId>(s));
    diameter_ = std::max(diameter_, *std::max_element(hops.begin(), hops.end()));
  }
}

void Topology::check_id(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw PreconditionError(fmt::format("unknown node {}", id));
}

const NodeSpec& Topology::node(NodeId id) const {
  check_id(id);
  return nodes_[id];
}

std::span<const Neighbor> Topology::neighbors(NodeId id) const {
  check_id(id);
  return adjacency_[id];
}

std::vector<NodeId> Topology::access_points() const {
  std::vector<NodeId> out;
  for (const auto& spec : nodes_)
    if (spec.is_access_point) out.push_back(spec.id);
  return out;
}

NodeId Topology::next_hop(NodeId id) const {
  check_id(id);
  if (id == server_) throw PreconditionError("next hop is undefined for the server");
  return next_hop_[id];
}

int Topology::hops_to_server(NodeId id) const {
  check_id(id);
  return hops_[id];
}

double Topology::path_delay_ms(NodeId from, NodeId to) const {
  check_id(from);
  check_id(to);
  return delay_matrix_[static_cast<std::size_t>(from) * nodes_.size() + to];
}

double Topology::link_delay_ms(NodeId a, NodeId b) const {
  for (const auto& nb : neighbors(a))
    if (nb.id == b) return nb.delay_ms;
  throw PreconditionError(fmt::format("no link {}-{}", a, b));
}

NodeId next_hop_toward_server(const Topology& topology, NodeId node) { return topology.next_hop(node); }

// ---------------------------------------------------------------------------
// Edge-list format

namespace {

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

template <typename T>
T parse_number(const std::string& tok, std::size_t line_no, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ValidationError(fmt::format("line {}: invalid {} '{}'", line_no, what, tok));
  return value;
}

}  // namespace

Topology load_topology(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto end = text.find('\n', pos);
      auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      const auto first = line.find_first_not_of(" \t");
      if (first != std::string_view::npos && line[first] != '#') lines.emplace_back(line_no, std::string(line));
      if (end == std::string_view::npos) break;
      pos = end + 1;
    }
  }
  if (lines.empty()) throw ValidationError("no nodes");

  const auto header = split_ws(lines[0].second);
  const auto header_line = lines[0].first;
  if (header.size() != 4 || header[0] != "nodes" || header[2] != "server")
    throw ValidationError(fmt::format("line {}: expected header 'nodes N server S'", header_line));
  const auto count = parse_number<int>(header[1], header_line, "node count");
  const auto server = parse_number<int>(header[3], header_line, "server id");
  if (count <= 0) throw ValidationError("no nodes");
  if (server < 0 || server >= count)
    throw ValidationError(fmt::format("line {}: missing server: id {} is not a node", header_line, server));
  if (lines.size() < static_cast<std::size_t>(count) + 1)
    throw ValidationError(fmt::format("line {}: expected {} node lines", header_line, count));

  std::vector<NodeSpec> nodes;
  std::vector<bool> defined(count, false);
  for (int i = 0; i < count; ++i) {
    const auto& [line_no, line] = lines[1 + i];
    const auto tok = split_ws(line);
    if (tok.size() != 4)
      throw ValidationError(fmt::format("line {}: expected 'id cpu mem access_flag'", line_no));
    NodeSpec spec;
    spec.id = parse_number<int>(tok[0], line_no, "node id");
    spec.cpu_capacity = parse_number<double>(tok[1], line_no, "cpu capacity");
    spec.mem_capacity = parse_number<double>(tok[2], line_no, "memory capacity");
    const auto flag = parse_number<int>(tok[3], line_no, "access flag");
    if (spec.id < 0 || spec.id >= count)
      throw ValidationError(fmt::format("line {}: node id {} outside 0..{}", line_no, spec.id, count - 1));
    if (defined[spec.id]) throw ValidationError(fmt::format("line {}: duplicate node {}", line_no, spec.id));
    defined[spec.id] = true;
    if (!(spec.cpu_capacity > 0.0) || !(spec.mem_capacity > 0.0))
      throw ValidationError(fmt::format("line {}: non-positive capacity at node {}", line_no, spec.id));
    if (flag != 0 && flag != 1) throw ValidationError(fmt::format("line {}: access flag must be 0 or 1", line_no));
    spec.is_access_point = flag == 1;
    spec.is_server = spec.id == server;
    nodes.push_back(spec);
  }

  std::vector<LinkSpec> links;
  std::set<std::pair<NodeId, NodeId>> seen;
  for (std::size_t i = 1 + count; i < lines.size(); ++i) {
    const auto& [line_no, line] = lines[i];
    const auto tok = split_ws(line);
    if (tok.size() != 2 && tok.size() != 3) throw ValidationError(fmt::format("line {}: expected 'u v delay_ms'", line_no));
    LinkSpec link;
    link.u = parse_number<int>(tok[0], line_no, "node id");
    link.v = parse_number<int>(tok[1], line_no, "node id");
    if (tok.size() == 3) link.delay_ms = parse_number<double>(tok[2], line_no, "delay");
    if (link.u == link.v) throw ValidationError(fmt::format("self-loop at line {}", line_no));
    if (link.u < 0 || link.u >= count || link.v < 0 || link.v >= count)
      throw ValidationError(fmt::format("line {}: link references unknown node", line_no));
    if (link.delay_ms < 0.0) throw ValidationError(fmt::format("line {}: negative delay", line_no));
    if (!seen.insert(std::minmax(link.u, link.v)).second)
      throw ValidationError(fmt::format("duplicate edge at line {}", line_no));
    links.push_back(link);
  }

  try {
    return Topology(std::move(nodes), std::move(links));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("line {}: {}", header_line, e.what()));
  }
}

Topology load_topology_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open topology file '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_topology(buf.str());
}

std::string to_edge_list(const Topology& topology) {
  std::string out = fmt::format("nodes {} server {}\n", topology.size(), topology.server());
  for (const auto& spec : topology.nodes())
    out += fmt::format("{} {} {} {}\n", spec.id, spec.cpu_capacity, spec.mem_capacity, spec.is_access_point ? 1 : 0);
  for (const auto& link : topology.links()) out += fmt::format("{} {} {}\n", link.u, link.v, link.delay_ms);
  return out;
}

// ---------------------------------------------------------------------------
// Generators

std::optional<TopologyKind> parse_topology_kind(std::string_view name) {
  if (name == "line") return TopologyKind::line;
  if (name == "grid") return TopologyKind::grid;
  if (name == "tree") return TopologyKind::tree;
  if (name == "scale_free") return TopologyKind::scale_free;
  return std::nullopt;
}

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::line: return "line";
    case TopologyKind::grid: return "grid";
    case TopologyKind::tree: return "tree";
    case TopologyKind::scale_free: return "scale_free";
  }
  return "?";
}

namespace {

using Edge = std::pair<NodeId, NodeId>;

std::vector<std::vector<Neighbor>> adjacency_of(int n, const std::vector<Edge>& edges) {
  std::vector<std::vector<Neighbor>> adj(n);
  for (auto [u, v] : edges) {
    adj[u].push_back({v, 1.0});
    adj[v].push_back({u, 1.0});
  }
  return adj;
}

// Highest eccentricity; ties go to the highest id so a line keeps its server
// at the far end from node 0.
NodeId max_eccentricity_node(int n, const std::vector<Edge>& edges) {
  const auto adj = adjacency_of(n, edges);
  NodeId best = 0;
  int best_ecc = -1;
  for (NodeId v = 0; v < n; ++v) {
    const auto d = bfs_hops(adj, v);
    const int ecc = *std::max_element(d.begin(), d.end());
    if (ecc >= best_ecc) {
      best_ecc = ecc;
      best = v;
    }
  }
  return best;
}

// Degree-one nodes other than the server. When there are none (grids, dense
// scale-free graphs) the minimum-degree non-server nodes are used instead.
std::vector<NodeId> default_access_points(int n, const std::vector<Edge>& edges, NodeId server) {
  std::vector<int> degree(n, 0);
  for (auto [u, v] : edges) {
    ++degree[u];
    ++degree[v];
  }
  int min_degree = std::numeric_limits<int>::max();
  for (NodeId v = 0; v < n; ++v)
    if (v != server) min_degree = std::min(min_degree, degree[v]);
  const int wanted = min_degree <= 1 ? 1 : min_degree;
  std::vector<NodeId> out;
  for (NodeId v = 0; v < n; ++v)
    if (v != server && degree[v] == wanted) out.push_back(v);
  return out;
}

Topology assemble(int n, const std::vector<Edge>& edges, NodeId server, const std::vector<NodeId>& aps,
                  const GeneratorParams& params) {
  std::vector<NodeSpec> nodes(n);
  for (NodeId v = 0; v < n; ++v) {
    nodes[v].id = v;
    nodes[v].cpu_capacity = params.cpu_capacity;
    nodes[v].mem_capacity = params.mem_capacity;
    nodes[v].is_server = v == server;
  }
  for (NodeId v : aps) nodes[v].is_access_point = true;
  std::vector<LinkSpec> links;
  links.reserve(edges.size());
  for (auto [u, v] : edges) links.push_back({u, v, params.delay_ms});
  return Topology(std::move(nodes), std::move(links));
}

}  // namespace

Topology generate_topology(TopologyKind kind, const GeneratorParams& params, std::uint64_t seed) {
  if (!(params.cpu_capacity > 0.0) || !(params.mem_capacity > 0.0))
    throw ValidationError("generator capacities must be positive");
  if (!(params.delay_ms >= 0.0)) throw ValidationError("generator link delay must be non-negative");

  std::vector<Edge> edges;
  int n = 0;
  NodeId server = 0;
  switch (kind) {
    case TopologyKind::line: {
      n = params.size;
      if (n < 2) throw ValidationError("line topology needs size >= 2");
      for (NodeId v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
      server = max_eccentricity_node(n, edges);
      break;
    }
    case TopologyKind::grid: {
      const int w = params.width;
      const int h = params.height;
      if (w < 1 || h < 1 || w * h < 2) throw ValidationError("grid topology needs width*height >= 2");
      n = w * h;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          const NodeId v = r * w + c;
          if (c + 1 < w) edges.emplace_back(v, v + 1);
          if (r + 1 < h) edges.emplace_back(v, v + w);
        }
      server = n - 1;
      break;
    }
    case TopologyKind::tree: {
      if (params.branching < 1 || params.depth < 1) throw ValidationError("tree topology needs branching >= 1 and depth >= 1");
      std::vector<NodeId> level{0};
      n = 1;
      for (int d = 0; d < params.depth; ++d) {
        std::vector<NodeId> next;
        for (NodeId parent : level)
          for (int b = 0; b < params.branching; ++b) {
            edges.emplace_back(parent, n);
            next.push_back(n++);
          }
        level = std::move(next);
      }
      server = max_eccentricity_node(n, edges);
      break;
    }
    case TopologyKind::scale_free: {
      n = params.size;
      const int m = params.attach;
      if (m < 1) throw ValidationError("scale_free topology needs attach >= 1");
      if (n < m + 2) throw ValidationError("scale_free topology needs size >= attach + 2");
      std::mt19937_64 rng(seed);
      std::vector<NodeId> endpoints;  // each node repeated once per incident edge
      for (NodeId u = 0; u <= m; ++u)
        for (NodeId v = u + 1; v <= m; ++v) {
          edges.emplace_back(u, v);
          endpoints.push_back(u);
          endpoints.push_back(v);
        }
      for (NodeId v = m + 1; v < n; ++v) {
        std::set<NodeId> targets;
        while (static_cast<int>(targets.size()) < m) {
          std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
          targets.insert(endpoints[pick(rng)]);
        }
        for (NodeId t : targets) {
          edges.emplace_back(t, v);
          endpoints.push_back(t);
          endpoints.push_back(v);
        }
      }
      std::vector<int> degree(n, 0);
      for (auto [u, v] : edges) {
        ++degree[u];
        ++degree[v];
      }
      server = static_cast<NodeId>(std::max_element(degree.begin(), degree.end()) - degree.begin());
      auto aps = default_access_points(n, edges, server);
      if (params.access_points) {
        if (*params.access_points < 1) throw ValidationError("access_points must be >= 1");
        std::shuffle(aps.begin(), aps.end(), rng);
        if (static_cast<int>(aps.size()) > *params.access_points) aps.resize(*params.access_points);
        std::sort(aps.begin(), aps.end());
      }
      return assemble(n, edges, server, aps, params);
    }
  }
  return assemble(n, edges, server, default_access_points(n, edges, server), params);
}

}  // namespace netoffload
