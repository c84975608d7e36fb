#include "netoffload/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>

#include <fmt/format.h>

#include "netoffload/error.hpp"

namespace netoffload {

using nlohmann::json;

// ---------------------------------------------------------------------------
// CallGraph

int CallGraph::add_class(ClassVertex vertex) {
  if (vertex.name.empty()) throw ValidationError("class name must not be empty");
  if (index_.contains(vertex.name)) throw ValidationError(fmt::format("duplicate class '{}'", vertex.name));
  const int id = size();
  index_.emplace(vertex.name, id);
  vertices_.push_back(std::move(vertex));
  adjacency_.emplace_back();
  return id;
}

void CallGraph::add_edge(std::string_view a, std::string_view b, double weight) {
  const auto ia = index_of(a);
  if (!ia) throw ValidationError(fmt::format("edge references unknown class '{}'", a));
  const auto ib = index_of(b);
  if (!ib) throw ValidationError(fmt::format("edge references unknown class '{}'", b));
  add_edge(*ia, *ib, weight);
}

void CallGraph::add_edge(int a, int b, double weight) {
  if (a < 0 || b < 0 || a >= size() || b >= size()) throw ValidationError("edge endpoint out of range");
  if (a == b) throw ValidationError(fmt::format("self-edge on class '{}'", vertex(a).name));
  if (!std::isfinite(weight) || weight < 0.0)
    throw ValidationError(fmt::format("edge {} - {} has invalid weight {}", vertex(a).name, vertex(b).name, weight));
  if (weight == 0.0) return;
  adjacency_[static_cast<std::size_t>(a)][b] += weight;
  adjacency_[static_cast<std::size_t>(b)][a] += weight;
}

std::vector<CallEdge> CallGraph::edges() const {
  std::vector<CallEdge> out;
  for (int a = 0; a < size(); ++a)
    for (const auto& [b, w] : adjacent(a))
      if (a < b) out.push_back({a, b, w});
  return out;
}

std::optional<int> CallGraph::index_of(std::string_view name) const {
  if (auto it = index_.find(name); it != index_.end()) return it->second;
  return std::nullopt;
}

double CallGraph::total_weight() const {
  double w = 0.0;
  for (const auto& e : edges()) w += e.weight;
  return w;
}

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

MethodProfile method_from_json(const json& m, const std::string& owner) {
  MethodProfile p;
  p.name = m.at("name").get<std::string>();
  p.invocations = m.value("invocations", 0.0);
  p.t_local = m.at("t_local_ms").get<double>() / 1000.0;
  p.in_bytes = m.value("in_bytes", 0.0);
  p.out_bytes = m.value("out_bytes", 0.0);
  p.energy_local = m.value("energy_mj", 0.0) / 1000.0;
  if (m.contains("cpu_scale_hint")) p.cpu_scale_hint = m.at("cpu_scale_hint").get<double>();
  if (m.contains("boundary")) p.boundary = m.at("boundary").get<bool>();
  const auto where = fmt::format("{}.{}", owner, p.name);
  if (!(p.invocations >= 0.0)) throw ValidationError(fmt::format("{}: invocations must be >= 0", where));
  if (!(p.t_local > 0.0)) throw ValidationError(fmt::format("{}: t_local_ms must be > 0", where));
  if (!(p.in_bytes >= 0.0) || !(p.out_bytes >= 0.0))
    throw ValidationError(fmt::format("{}: byte sizes must be >= 0", where));
  if (!(p.energy_local >= 0.0)) throw ValidationError(fmt::format("{}: energy_mj must be >= 0", where));
  if (p.cpu_scale_hint && !(*p.cpu_scale_hint > 0.0))
    throw ValidationError(fmt::format("{}: cpu_scale_hint must be > 0", where));
  return p;
}

}  // namespace

CallGraph call_graph_from_json(const json& doc) {
  CallGraph g;
  try {
    for (const auto& v : doc.at("vertices")) {
      ClassVertex cv;
      cv.name = v.at("name").get<std::string>();
      if (v.contains("tags"))
        for (const auto& t : v.at("tags")) cv.tags.insert(t.get<std::string>());
      if (v.contains("methods"))
        for (const auto& m : v.at("methods")) cv.methods.push_back(method_from_json(m, cv.name));
      g.add_class(std::move(cv));
    }
    if (doc.contains("edges"))
      for (const auto& e : doc.at("edges"))
        g.add_edge(e.at("a").get<std::string>(), e.at("b").get<std::string>(), e.at("weight").get<double>());
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("call graph: {}", e.what()));
  }
  return g;
}

CallGraph load_call_graph(const std::filesystem::path& path) { return call_graph_from_json(read_json(path)); }

json call_graph_to_json(const CallGraph& graph) {
  json vertices = json::array();
  for (const auto& v : graph.vertices()) {
    json methods = json::array();
    for (const auto& m : v.methods) {
      json jm = {{"name", m.name},
                 {"invocations", m.invocations},
                 {"t_local_ms", m.t_local * 1000.0},
                 {"in_bytes", m.in_bytes},
                 {"out_bytes", m.out_bytes},
                 {"energy_mj", m.energy_local * 1000.0}};
      if (m.cpu_scale_hint) jm["cpu_scale_hint"] = *m.cpu_scale_hint;
      if (m.boundary) jm["boundary"] = *m.boundary;
      methods.push_back(std::move(jm));
    }
    vertices.push_back({{"name", v.name}, {"tags", v.tags}, {"methods", std::move(methods)}});
  }
  json edges = json::array();
  for (const auto& e : graph.edges())
    edges.push_back({{"a", graph.vertex(e.a).name}, {"b", graph.vertex(e.b).name}, {"weight", e.weight}});
  return {{"vertices", std::move(vertices)}, {"edges", std::move(edges)}};
}

// ---------------------------------------------------------------------------
// Tag rules

std::vector<TagRule> tag_rules_from_json(const json& doc) {
  const json& list = doc.is_object() && doc.contains("rules") ? doc.at("rules") : doc;
  if (!list.is_array()) throw ValidationError("tag rules must be an array of {prefix, tag}");
  std::vector<TagRule> rules;
  try {
    for (const auto& r : list) {
      TagRule rule{r.at("prefix").get<std::string>(), r.at("tag").get<std::string>()};
      if (rule.prefix.empty() || rule.tag.empty()) throw ValidationError("tag rule prefix and tag must be non-empty");
      rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("tag rules: {}", e.what()));
  }
  return rules;
}

std::vector<TagRule> load_tag_rules(const std::filesystem::path& path) { return tag_rules_from_json(read_json(path)); }

bool prefix_matches(std::string_view prefix, std::string_view name) {
  if (!name.starts_with(prefix)) return false;
  return name.size() == prefix.size() || name[prefix.size()] == '.';
}

std::optional<std::string> match_tag(const std::vector<TagRule>& rules, std::string_view name) {
  const TagRule* best = nullptr;
  for (const auto& r : rules)
    if (prefix_matches(r.prefix, name) && (!best || r.prefix.size() > best->prefix.size())) best = &r;
  if (!best) return std::nullopt;
  return best->tag;
}

CallGraph apply_tag_rules(CallGraph graph, const std::vector<TagRule>& rules) {
  for (int i = 0; i < graph.size(); ++i)
    if (auto tag = match_tag(rules, graph.vertex(i).name)) graph.vertex(i).tags.insert(*tag);
  return graph;
}

// ---------------------------------------------------------------------------
// Betweenness

namespace {

using Adjacency = std::vector<std::map<int, double>>;

Adjacency adjacency_of(const CallGraph& g) {
  Adjacency adj(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.size(); ++i) adj[static_cast<std::size_t>(i)] = g.adjacent(i);
  return adj;
}

std::map<EdgeKey, double> brandes(const Adjacency& adj, PathMetric metric) {
  const int n = static_cast<int>(adj.size());
  std::map<EdgeKey, double> score;
  for (int v = 0; v < n; ++v)
    for (const auto& [w, _] : adj[static_cast<std::size_t>(v)])
      if (v < w) score[{v, w}] = 0.0;

  std::vector<double> sigma(static_cast<std::size_t>(n));
  std::vector<double> dist(static_cast<std::size_t>(n));
  std::vector<double> delta(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> preds(static_cast<std::size_t>(n));
  std::vector<int> order;
  constexpr double inf = std::numeric_limits<double>::infinity();

  for (int s = 0; s < n; ++s) {
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto& p : preds) p.clear();
    order.clear();
    sigma[static_cast<std::size_t>(s)] = 1.0;
    dist[static_cast<std::size_t>(s)] = 0.0;

    if (metric == PathMetric::hops) {
      std::queue<int> q;
      q.push(s);
      while (!q.empty()) {
        const int v = q.front();
        q.pop();
        order.push_back(v);
        for (const auto& [w, _] : adj[static_cast<std::size_t>(v)]) {
          const auto wi = static_cast<std::size_t>(w);
          if (dist[wi] == inf) {
            dist[wi] = dist[static_cast<std::size_t>(v)] + 1.0;
            q.push(w);
          }
          if (dist[wi] == dist[static_cast<std::size_t>(v)] + 1.0) {
            sigma[wi] += sigma[static_cast<std::size_t>(v)];
            preds[wi].push_back(v);
          }
        }
      }
    } else {
      using Item = std::pair<double, int>;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
      std::vector<bool> settled(static_cast<std::size_t>(n), false);
      pq.push({0.0, s});
      while (!pq.empty()) {
        const auto [d, v] = pq.top();
        pq.pop();
        const auto vi = static_cast<std::size_t>(v);
        if (settled[vi] || d > dist[vi]) continue;
        settled[vi] = true;
        order.push_back(v);
        for (const auto& [w, weight] : adj[vi]) {
          const auto wi = static_cast<std::size_t>(w);
          if (settled[wi]) continue;
          const double nd = dist[vi] + 1.0 / weight;
          const double eps = 1e-12 * std::max(1.0, nd);
          if (nd < dist[wi] - eps) {
            dist[wi] = nd;
            sigma[wi] = sigma[vi];
            preds[wi].assign(1, v);
            pq.push({nd, w});
          } else if (std::abs(nd - dist[wi]) <= eps) {
            sigma[wi] += sigma[vi];
            preds[wi].push_back(v);
          }
        }
      }
    }

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const auto wi = static_cast<std::size_t>(*it);
      for (const int v : preds[wi]) {
        const auto vi = static_cast<std::size_t>(v);
        const double c = sigma[vi] / sigma[wi] * (1.0 + delta[wi]);
        score[{std::min(v, *it), std::max(v, *it)}] += c;
        delta[vi] += c;
      }
    }
  }
  // Every unordered pair was accumulated from both ends.
  for (auto& [_, value] : score) value /= 2.0;
  return score;
}

std::vector<std::vector<int>> components(const Adjacency& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<int>> out;
  for (int s = 0; s < n; ++s) {
    if (label[static_cast<std::size_t>(s)] >= 0) continue;
    std::vector<int> members{s};
    label[static_cast<std::size_t>(s)] = static_cast<int>(out.size());
    for (std::size_t i = 0; i < members.size(); ++i)
      for (const auto& [w, _] : adj[static_cast<std::size_t>(members[i])])
        if (label[static_cast<std::size_t>(w)] < 0) {
          label[static_cast<std::size_t>(w)] = static_cast<int>(out.size());
          members.push_back(w);
        }
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  return out;
}

}  // namespace

std::map<EdgeKey, double> edge_betweenness(const CallGraph& graph, PathMetric metric) {
  return brandes(adjacency_of(graph), metric);
}

// ---------------------------------------------------------------------------
// Modularity and partition sets

double modularity(const CallGraph& graph, const std::vector<std::vector<int>>& clusters) {
  const int n = graph.size();
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (const int v : clusters[c]) {
      if (v < 0 || v >= n) throw ValidationError(fmt::format("partition references vertex {} outside the graph", v));
      if (label[static_cast<std::size_t>(v)] >= 0)
        throw ValidationError(fmt::format("vertex '{}' appears in two clusters", graph.vertex(v).name));
      label[static_cast<std::size_t>(v)] = static_cast<int>(c);
    }
  for (int v = 0; v < n; ++v)
    if (label[static_cast<std::size_t>(v)] < 0)
      throw ValidationError(fmt::format("vertex '{}' is not in any cluster", graph.vertex(v).name));

  const double total = graph.total_weight();
  if (total <= 0.0) return 0.0;
  std::vector<double> inside(clusters.size(), 0.0);
  std::vector<double> degree(clusters.size(), 0.0);
  for (const auto& e : graph.edges()) {
    const auto ca = static_cast<std::size_t>(label[static_cast<std::size_t>(e.a)]);
    const auto cb = static_cast<std::size_t>(label[static_cast<std::size_t>(e.b)]);
    if (ca == cb) inside[ca] += e.weight;
    degree[ca] += e.weight;
    degree[cb] += e.weight;
  }
  double q = 0.0;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const double share = degree[c] / (2.0 * total);
    q += inside[c] / total - share * share;
  }
  return q;
}

PartitionSet make_partition_set(const CallGraph& graph, std::vector<std::vector<int>> clusters) {
  std::erase_if(clusters, [](const auto& c) { return c.empty(); });
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  std::sort(clusters.begin(), clusters.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
  PartitionSet ps;
  ps.modularity = modularity(graph, clusters);
  for (const auto& c : clusters)
    ps.offloadable.push_back(std::none_of(c.begin(), c.end(), [&](int v) { return graph.vertex(v).pinned(); }));
  ps.n_clusters = static_cast<int>(clusters.size());
  ps.clusters = std::move(clusters);
  return ps;
}

// ---------------------------------------------------------------------------
// Girvan-Newman

GirvanNewmanTrace girvan_newman_trace(const CallGraph& graph, int max_clusters, const GirvanNewmanOptions& options) {
  GirvanNewmanTrace trace;
  Adjacency work = adjacency_of(graph);
  auto comps = components(work);
  trace.snapshots.push_back(make_partition_set(graph, comps));
  std::size_t edges_left = graph.edges().size();

  while (static_cast<int>(comps.size()) < max_clusters && edges_left > 0) {
    const auto scores = brandes(work, options.metric);
    double best = -1.0;
    for (const auto& [_, s] : scores) best = std::max(best, s);
    const double cut = best - options.tie_tolerance * std::max(1.0, best);
    // Map order is ascending (a, b): the first edge within tolerance wins.
    EdgeKey chosen{-1, -1};
    for (const auto& [key, s] : scores)
      if (s >= cut) {
        chosen = key;
        break;
      }
    work[static_cast<std::size_t>(chosen.first)].erase(chosen.second);
    work[static_cast<std::size_t>(chosen.second)].erase(chosen.first);
    --edges_left;
    trace.removed.push_back(chosen);
    auto next = components(work);
    if (next.size() > comps.size()) {
      comps = std::move(next);
      trace.snapshots.push_back(make_partition_set(graph, comps));
    }
  }
  return trace;
}

PartitionSet girvan_newman(const CallGraph& graph, int n_clusters, const GirvanNewmanOptions& options) {
  if (n_clusters < 1 || n_clusters > graph.size())
    throw ValidationError(fmt::format("cluster count {} outside 1..{}", n_clusters, graph.size()));
  return girvan_newman_trace(graph, n_clusters, options).snapshots.back();
}

// ---------------------------------------------------------------------------
// Louvain

namespace {

// Aggregated graph: adj[i][j] for i != j, self[i] = weight inside i.
struct LevelGraph {
  std::vector<std::map<int, double>> adj;
  std::vector<double> self;

  std::size_t size() const { return adj.size(); }
  double degree(std::size_t i) const {
    double k = 2.0 * self[i];
    for (const auto& [_, w] : adj[i]) k += w;
    return k;
  }
};

// One local-moving phase. Returns community labels renumbered 0..c-1 in
// order of first appearance, and whether anything moved.
std::pair<std::vector<int>, bool> local_moves(const LevelGraph& g, double total, double min_gain,
                                              std::vector<int> comm) {
  const std::size_t n = g.size();
  std::vector<double> k(n), tot(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    k[i] = g.degree(i);
    tot[static_cast<std::size_t>(comm[i])] += k[i];
  }

  bool any = false;
  for (bool moved = true; moved;) {
    moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int old = comm[i];
      tot[static_cast<std::size_t>(old)] -= k[i];
      std::map<int, double> links;  // community -> weight from i
      links[old] += 0.0;
      for (const auto& [j, w] : g.adj[i]) links[comm[static_cast<std::size_t>(j)]] += w;
      // Gain of joining c, scaled by 1/total: links - tot * k / (2 total).
      auto gain = [&](int c, double w) { return w - tot[static_cast<std::size_t>(c)] * k[i] / (2.0 * total); };
      int best = old;
      double best_gain = gain(old, links[old]);
      for (const auto& [c, w] : links) {
        const double value = gain(c, w);
        if ((value - best_gain) / total > min_gain) {
          best = c;
          best_gain = value;
        }
      }
      tot[static_cast<std::size_t>(best)] += k[i];
      if (best != old) {
        comm[i] = best;
        moved = true;
        any = true;
      }
    }
  }
  std::map<int, int> rename;
  for (auto& c : comm) {
    const auto [it, _] = rename.emplace(c, static_cast<int>(rename.size()));
    c = it->second;
  }
  return {comm, any};
}

LevelGraph aggregate(const LevelGraph& g, const std::vector<int>& comm) {
  const auto c = static_cast<std::size_t>(*std::max_element(comm.begin(), comm.end()) + 1);
  LevelGraph out;
  out.adj.resize(c);
  out.self.assign(c, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto ci = static_cast<std::size_t>(comm[i]);
    out.self[ci] += g.self[i];
    for (const auto& [j, w] : g.adj[i]) {
      const auto cj = static_cast<std::size_t>(comm[static_cast<std::size_t>(j)]);
      if (ci == cj) {
        if (static_cast<std::size_t>(j) > i) out.self[ci] += w;
      } else {
        out.adj[ci][static_cast<int>(cj)] += w;
      }
    }
  }
  return out;
}

}  // namespace

PartitionSet louvain_optimal(const CallGraph& graph, const LouvainOptions& options) {
  const int n = graph.size();
  if (n == 0) return make_partition_set(graph, {});
  const double total = graph.total_weight();
  if (total <= 0.0) {
    std::vector<std::vector<int>> singletons;
    for (int v = 0; v < n; ++v) singletons.push_back({v});
    return make_partition_set(graph, std::move(singletons));
  }

  LevelGraph level;
  level.adj = adjacency_of(graph);
  level.self.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<int> membership(static_cast<std::size_t>(n));
  std::iota(membership.begin(), membership.end(), 0);

  const LevelGraph base = level;
  // Multilevel passes, then a vertex-level pass seeded with the result. A
  // vertex move that still gains restarts aggregation from there.
  for (int round = 0; round < 16; ++round) {
    while (true) {
      std::vector<int> start(level.size());
      std::iota(start.begin(), start.end(), 0);
      auto [comm, moved] = local_moves(level, total, options.min_gain, std::move(start));
      if (!moved) break;
      for (auto& m : membership) m = comm[static_cast<std::size_t>(m)];
      level = aggregate(level, comm);
    }
    auto [refined, moved] = local_moves(base, total, options.min_gain, membership);
    if (!moved) break;
    membership = refined;
    level = aggregate(base, membership);
  }

  std::map<int, std::vector<int>> groups;
  for (int v = 0; v < n; ++v) groups[membership[static_cast<std::size_t>(v)]].push_back(v);
  std::vector<std::vector<int>> clusters;
  for (auto& [_, members] : groups) clusters.push_back(std::move(members));
  auto result = make_partition_set(graph, std::move(clusters));
  if (result.modularity < 0.0) {
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    return make_partition_set(graph, {all});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Enumeration

PartitionEnumeration enumerate_partition_sets(const CallGraph& graph, const GirvanNewmanOptions& gn,
                                              const LouvainOptions& louvain) {
  PartitionEnumeration out;
  const auto best = louvain_optimal(graph, louvain);
  out.n_opt = best.n_clusters;
  out.louvain_modularity = best.modularity;
  if (out.n_opt < 2) return out;
  auto trace = girvan_newman_trace(graph, out.n_opt, gn);
  for (auto& s : trace.snapshots)
    if (s.n_clusters >= 2 && s.n_clusters <= out.n_opt) out.sets.push_back(std::move(s));
  return out;
}

double offloadable_fraction(const CallGraph& graph, const PartitionSet& partition) {
  if (graph.size() == 0) return 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < partition.clusters.size(); ++c)
    if (partition.offloadable[c]) count += partition.clusters[c].size();
  return 100.0 * static_cast<double>(count) / static_cast<double>(graph.size());
}

json partition_set_to_json(const CallGraph& graph, const PartitionSet& partition) {
  json clusters = json::array();
  for (std::size_t c = 0; c < partition.clusters.size(); ++c) {
    json names = json::array();
    for (const int v : partition.clusters[c]) names.push_back(graph.vertex(v).name);
    clusters.push_back({{"classes", std::move(names)}, {"offloadable", static_cast<bool>(partition.offloadable[c])}});
  }
  return {{"n_clusters", partition.n_clusters},
          {"modularity", partition.modularity},
          {"offloadable_fraction", offloadable_fraction(graph, partition)},
          {"clusters", std::move(clusters)}};
}

json enumeration_to_json(const CallGraph& graph, const PartitionEnumeration& enumeration) {
  json sets = json::array();
  for (const auto& s : enumeration.sets) sets.push_back(partition_set_to_json(graph, s));
  return {{"n_opt", enumeration.n_opt},
          {"louvain_modularity", enumeration.louvain_modularity},
          {"sets", std::move(sets)}};
}

}  // namespace netoffload
