#include "netoffload/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <tuple>

#include <fmt/format.h>

#include "netoffload/error.hpp"

namespace netoffload {

int ScenarioConfig::effective_ttl() const {
  if (strategy.ttl) return *strategy.ttl;
  return topology ? 2 * std::max(1, topology->diameter()) : 2;
}

void ScenarioConfig::validate() const {
  if (!topology) throw ValidationError("scenario has no topology");
  if (services.empty()) throw ValidationError("scenario has no services");
  if (!(arrival_rate >= 0.0)) throw ValidationError("arrival_rate must be >= 0");
  if (!(load_multiplier > 0.0)) throw ValidationError("load_multiplier must be > 0");
  if (!(horizon > 0.0)) throw ValidationError("horizon must be > 0");
  const double w = effective_warmup();
  if (!(w >= 0.0) || !(horizon > w)) throw ValidationError("need horizon > warmup >= 0");
  if (!(preroll >= 0.0)) throw ValidationError("preroll must be >= 0");
  if (!(sample_period_ms >= 0.0)) throw ValidationError("sample_period_ms must be >= 0");
  if (!(capacity_threshold > 0.0)) throw ValidationError("capacity_threshold must be > 0");
  if (strategy.k < 2) throw ValidationError("strategy k must be >= 2");
  if (strategy.ttl && *strategy.ttl < 0) throw ValidationError("ttl must be >= 0");
  if (!(strategy.gossip_period_ms >= 0.0)) throw ValidationError("gossip_period_ms must be >= 0");
  if (topology->access_points().empty()) throw ValidationError("topology has no access points");
  validate_jitters(jitters, horizon);
}

const NodeMetrics* RunMetrics::node(NodeId id) const {
  for (const auto& n : nodes)
    if (n.node == id) return &n;
  return nullptr;
}

std::vector<LoadSample> series_for(const RunMetrics& metrics, NodeId node, double from_ms, double to_ms) {
  std::vector<LoadSample> out;
  for (const auto& s : metrics.series)
    if (s.node == node && s.time_ms >= from_ms && s.time_ms < to_ms) out.push_back(s);
  return out;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

enum class EventKind : std::uint8_t { completion, gossip, arrival, hop, heartbeat, sample };

int rank_of(EventKind kind) {
  switch (kind) {
    case EventKind::completion: return 0;
    case EventKind::gossip: return 1;
    case EventKind::arrival:
    case EventKind::hop: return 2;
    case EventKind::heartbeat: return 3;
    case EventKind::sample: return 4;
  }
  return 5;
}

struct Event {
  double time = 0.0;
  int rank = 0;
  NodeId node = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::sample;
  std::uint64_t ref = 0;  // request slot or completion generation
  NodeId from = -1;
  double value = 0.0;
  double as_of = 0.0;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    return std::tie(a.time, a.rank, a.node, a.seq) > std::tie(b.time, b.rank, b.node, b.seq);
  }
};

struct Job {
  double finish_virtual;
  std::uint32_t slot;
  bool operator>(const Job& o) const {
    return std::tie(finish_virtual, slot) > std::tie(o.finish_virtual, o.slot);
  }
};

// Processor-sharing node: n running jobs each progress at rate 1/n. Virtual
// time counts per-job attained service, so a job admitted at virtual time V
// with demand d finishes when virtual time reaches V + d.
struct NodeState {
  bool computes = false;
  double cpu_capacity = 1.0;
  double mem_capacity = 1.0;
  double virtual_time = 0.0;
  double last_update = 0.0;
  std::priority_queue<Job, std::vector<Job>, std::greater<>> jobs;
  double cpu_in_use = 0.0;
  double mem_in_use = 0.0;
  std::uint64_t generation = 0;

  EstimatorState estimator{128};
  NeighborLoadTable neighbors;
  std::vector<NodeId> candidates;

  double load_area = 0.0;
  double concurrency_area = 0.0;
  double peak_load = 0.0;
  NodeMetrics metrics;
  double q_sum = 0.0;

  double load() const { return cpu_in_use / cpu_capacity; }
};

class Simulation {
 public:
  explicit Simulation(const ScenarioConfig& config)
      : cfg_(config),
        topo_(*config.topology),
        window_start_(config.effective_warmup()),
        window_end_(config.horizon),
        ttl_(config.effective_ttl()),
        workload_rng_(derive_seed(config.seed, 1)),
        decision_rng_(derive_seed(config.seed, 2)) {
    cfg_.validate();
    access_points_ = topo_.access_points();
    nodes_.resize(topo_.size());
    for (const auto& spec : topo_.nodes()) {
      auto& ns = nodes_[spec.id];
      ns.cpu_capacity = spec.cpu_capacity;
      ns.mem_capacity = spec.mem_capacity;
      ns.computes = !spec.is_server && !(cfg_.relay_access_points && spec.is_access_point);
      ns.estimator = EstimatorState(cfg_.strategy.k);
      ns.metrics.node = spec.id;
      ns.last_update = -cfg_.preroll;
    }
    if (cfg_.strategy.kind == StrategyKind::proactive && cfg_.strategy.forwarding_enabled) {
      for (const auto& spec : topo_.nodes()) {
        auto& ns = nodes_[spec.id];
        if (!ns.computes) continue;
        for (const auto& nb : topo_.neighbors(spec.id)) {
          const bool server_candidate = nb.id == topo_.server() && cfg_.server_executes;
          if (nodes_[nb.id].computes || server_candidate) {
            ns.candidates.push_back(nb.id);
            ns.neighbors.update(nb.id, 0.0, -1.0);
          }
        }
      }
    }
    if (cfg_.arrival_rate > 0.0)
      stream_.emplace(cfg_.arrival_rate * cfg_.load_multiplier, cfg_.jitters, cfg_.horizon, cfg_.services,
                      derive_seed(cfg_.seed, 0), -cfg_.preroll);
    now_ = -cfg_.preroll;
  }

  RunMetrics run() {
    schedule_next_arrival();
    if (cfg_.sample_period_ms > 0.0) push({.time = 0.0, .node = 0, .kind = EventKind::sample});
    if (cfg_.strategy.kind == StrategyKind::proactive && cfg_.strategy.gossip_period_ms > 0.0) {
      const double period = cfg_.strategy.gossip_period_ms / 1000.0;
      for (const auto& spec : topo_.nodes())
        if (nodes_[spec.id].computes && !topo_.neighbors(spec.id).empty() && period - cfg_.preroll < cfg_.horizon)
          push({.time = period - cfg_.preroll, .node = spec.id, .kind = EventKind::heartbeat});
    }

    while (!queue_.empty()) {
      const Event ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      switch (ev.kind) {
        case EventKind::arrival: on_arrival(ev); break;
        case EventKind::hop: on_request_at(ev.node, static_cast<std::uint32_t>(ev.ref)); break;
        case EventKind::completion: on_completion(ev); break;
        case EventKind::gossip: on_gossip(ev); break;
        case EventKind::heartbeat: on_heartbeat(ev); break;
        case EventKind::sample: on_sample(); break;
      }
    }
    return finish();
  }

 private:
  void push(Event ev) {
    ev.rank = rank_of(ev.kind);
    ev.seq = seq_++;
    queue_.push(ev);
  }

  std::uint32_t alloc(const Request& r) {
    if (!free_slots_.empty()) {
      const auto slot = free_slots_.back();
      free_slots_.pop_back();
      pool_[slot] = r;
      return slot;
    }
    pool_.push_back(r);
    return static_cast<std::uint32_t>(pool_.size() - 1);
  }
  void release(std::uint32_t slot) { free_slots_.push_back(slot); }
  bool counted(const Request& r) const { return r.arrival_time >= window_start_; }

  void schedule_next_arrival() {
    if (!stream_) return;
    const auto next = stream_->next();
    if (!next) return;
    Request r;
    r.id = next_request_id_++;
    r.service_id = next->service_id;
    std::uniform_int_distribution<std::size_t> pick(0, access_points_.size() - 1);
    r.origin_node = access_points_[access_points_.size() == 1 ? 0 : pick(workload_rng_)];
    r.arrival_time = next->time;
    r.first_hop_time = next->time;
    r.ttl_remaining = ttl_;
    const auto& svc = cfg_.services.at(r.service_id);
    std::exponential_distribution<double> demand(1.0 / svc.mean_exec_time);
    r.demand = demand(workload_rng_);
    r.cpu_cost = svc.cpu_cost;
    r.mem_cost = svc.mem_cost;
    const auto slot = alloc(r);
    push({.time = r.arrival_time, .node = r.origin_node, .kind = EventKind::arrival, .ref = slot});
  }

  void on_arrival(const Event& ev) {
    const auto slot = static_cast<std::uint32_t>(ev.ref);
    if (counted(pool_[slot])) ++total_;
    schedule_next_arrival();
    on_request_at(ev.node, slot);
  }

  void on_request_at(NodeId node, std::uint32_t slot) {
    Request& r = pool_[slot];
    if (node == topo_.server()) {
      if (cfg_.server_executes)
        execute_at_server(slot);
      else
        drop(node, slot);
      return;
    }
    auto& ns = nodes_[node];
    if (!ns.computes) {
      const NodeId next = topo_.next_hop(node);
      if (next == topo_.server() && !cfg_.server_executes)
        drop(node, slot);
      else
        forward(node, next, slot);
      return;
    }

    AdmissionDecision decision;
    switch (cfg_.strategy.kind) {
      case StrategyKind::none: decision = decide_none(ns.load(), cfg_.capacity_threshold); break;
      case StrategyKind::passive:
        decision = decide_passive(ns.load(), cfg_.capacity_threshold, node, topo_, cfg_.server_executes);
        break;
      case StrategyKind::proactive: {
        ns.estimator.record_arrival(now_);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        const double draw = uniform(decision_rng_);
        const bool feasible = cfg_.ttl_fallback == TtlFallback::cpu
                                  ? ns.load() < cfg_.capacity_threshold
                                  : ns.mem_in_use + r.mem_cost <= ns.mem_capacity;
        const auto outcome = decide_proactive(ns.estimator, ns.neighbors, ns.cpu_capacity, ns.mem_capacity, draw,
                                              r.ttl_remaining, feasible);
        if (counted(r)) {
          ++ns.metrics.proactive_decisions;
          ns.q_sum += outcome.q;
        }
        decision = outcome.decision;
        break;
      }
    }

    switch (decision.kind) {
      case AdmissionDecision::Kind::execute: execute(node, slot); break;
      case AdmissionDecision::Kind::forward: forward(node, decision.target, slot); break;
      case AdmissionDecision::Kind::drop: drop(node, slot); break;
    }
  }

  void forward(NodeId from, NodeId to, std::uint32_t slot) {
    Request& r = pool_[slot];
    const double delay_ms = topo_.link_delay_ms(from, to);
    r.path_delay_ms += delay_ms;
    --r.ttl_remaining;
    if (counted(r)) {
      ++forwarded_;
      ++nodes_[from].metrics.forwarded;
    }
    push({.time = now_ + delay_ms / 1000.0, .node = to, .kind = EventKind::hop, .ref = slot});
  }

  void drop(NodeId node, std::uint32_t slot) {
    if (counted(pool_[slot])) {
      ++dropped_;
      if (node != topo_.server()) ++nodes_[node].metrics.dropped;
    }
    release(slot);
  }

  void execute_at_server(std::uint32_t slot) {
    const Request& r = pool_[slot];
    if (counted(r)) {
      ++executed_;
      ++executed_at_server_;
      latency_sum_ += now_ + r.demand - r.arrival_time + topo_.path_delay_ms(topo_.server(), r.origin_node) / 1000.0;
    }
    release(slot);
  }

  void advance(NodeState& ns, double t) {
    const double dt = t - ns.last_update;
    if (dt <= 0.0) return;
    const auto n = ns.jobs.size();
    if (n > 0) ns.virtual_time += dt / static_cast<double>(n);
    const double a = std::max(ns.last_update, window_start_);
    const double b = std::min(t, window_end_);
    if (b > a) {
      ns.load_area += ns.load() * (b - a);
      ns.concurrency_area += static_cast<double>(n) * (b - a);
      ns.peak_load = std::max(ns.peak_load, ns.load());
    }
    ns.last_update = t;
  }

  void reschedule(NodeId node) {
    auto& ns = nodes_[node];
    ++ns.generation;
    if (ns.jobs.empty()) return;
    const double remaining = std::max(0.0, ns.jobs.top().finish_virtual - ns.virtual_time);
    push({.time = now_ + remaining * static_cast<double>(ns.jobs.size()),
          .node = node,
          .kind = EventKind::completion,
          .ref = ns.generation});
  }

  void execute(NodeId node, std::uint32_t slot) {
    auto& ns = nodes_[node];
    advance(ns, now_);
    const Request& r = pool_[slot];
    ns.jobs.push({ns.virtual_time + r.demand, slot});
    ns.cpu_in_use += r.cpu_cost;
    ns.mem_in_use += r.mem_cost;
    reschedule(node);
  }

  void on_completion(const Event& ev) {
    auto& ns = nodes_[ev.node];
    if (ev.ref != ns.generation) return;
    advance(ns, now_);
    const auto job = ns.jobs.top();
    ns.jobs.pop();
    const Request& r = pool_[job.slot];
    if (ns.jobs.empty()) {
      ns.cpu_in_use = 0.0;
      ns.mem_in_use = 0.0;
      ns.virtual_time = 0.0;
    } else {
      ns.cpu_in_use = std::max(0.0, ns.cpu_in_use - r.cpu_cost);
      ns.mem_in_use = std::max(0.0, ns.mem_in_use - r.mem_cost);
    }
    ns.estimator.record_completion(r.demand > 0.0 ? r.demand : std::numeric_limits<double>::min(), r.cpu_cost,
                                   r.mem_cost);
    if (counted(r)) {
      ++executed_;
      ++ns.metrics.executed;
      latency_sum_ += now_ - r.arrival_time + topo_.path_delay_ms(ev.node, r.origin_node) / 1000.0;
    }
    release(job.slot);
    reschedule(ev.node);
    if (cfg_.strategy.kind == StrategyKind::proactive && cfg_.strategy.gossip_on_completion) gossip(ev.node);
  }

  void gossip(NodeId node) {
    for (const auto& msg : publish_load(topo_, node, nodes_[node].load(), now_))
      push({.time = msg.deliver_at,
            .node = msg.to,
            .kind = EventKind::gossip,
            .from = msg.from,
            .value = msg.normalized_load,
            .as_of = msg.as_of});
  }

  void on_gossip(const Event& ev) {
    if (ev.node == topo_.server()) return;
    auto& ns = nodes_[ev.node];
    if (std::find(ns.candidates.begin(), ns.candidates.end(), ev.from) == ns.candidates.end()) return;
    ns.neighbors.update(ev.from, ev.value, ev.as_of);
  }

  void on_heartbeat(const Event& ev) {
    gossip(ev.node);
    const double next = now_ + cfg_.strategy.gossip_period_ms / 1000.0;
    if (next < cfg_.horizon) push({.time = next, .node = ev.node, .kind = EventKind::heartbeat});
  }

  void on_sample() {
    for (const auto& spec : topo_.nodes()) {
      const auto& ns = nodes_[spec.id];
      if (ns.computes) series_.push_back({now_ * 1000.0, spec.id, ns.load()});
    }
    ++sample_count_;
    const double next = static_cast<double>(sample_count_) * cfg_.sample_period_ms / 1000.0;
    if (next <= cfg_.horizon + 1e-12) push({.time = next, .node = 0, .kind = EventKind::sample});
  }

  RunMetrics finish() {
    RunMetrics m;
    m.window_start = window_start_;
    m.window_end = window_end_;
    const double span = window_end_ - window_start_;
    double tau_sum = 0.0;
    std::size_t compute_nodes = 0;
    for (auto& ns : nodes_) {
      if (!ns.computes) continue;
      advance(ns, std::max(ns.last_update, window_end_));
      ns.metrics.mean_load = span > 0.0 ? ns.load_area / span : 0.0;
      ns.metrics.mean_concurrency = span > 0.0 ? ns.concurrency_area / span : 0.0;
      ns.metrics.peak_load = ns.peak_load;
      ns.metrics.mean_q =
          ns.metrics.proactive_decisions > 0 ? ns.q_sum / static_cast<double>(ns.metrics.proactive_decisions) : 1.0;
      tau_sum += ns.metrics.mean_load;
      ++compute_nodes;
      m.nodes.push_back(ns.metrics);
    }
    m.tau = compute_nodes > 0 ? tau_sum / static_cast<double>(compute_nodes) : 0.0;
    m.total = total_;
    m.executed = executed_;
    m.executed_at_server = executed_at_server_;
    m.forwarded = forwarded_;
    m.dropped = dropped_;
    m.psi = total_ > 0 ? static_cast<double>(dropped_) / static_cast<double>(total_) : 0.0;
    m.phi_ms = executed_ > 0 ? 1000.0 * latency_sum_ / static_cast<double>(executed_) : 0.0;
    m.series = std::move(series_);
    return m;
  }

  ScenarioConfig cfg_;
  const Topology& topo_;
  double window_start_;
  double window_end_;
  int ttl_;
  std::mt19937_64 workload_rng_;
  std::mt19937_64 decision_rng_;
  std::optional<PoissonStream> stream_;
  std::vector<NodeId> access_points_;
  std::vector<NodeState> nodes_;
  std::priority_queue<Event, std::vector<Event>, EventLater> queue_;
  std::vector<Request> pool_;
  std::vector<std::uint32_t> free_slots_;
  std::uint64_t seq_ = 0;
  std::uint64_t next_request_id_ = 0;
  std::uint64_t sample_count_ = 0;
  double now_ = 0.0;

  std::uint64_t total_ = 0;
  std::uint64_t executed_ = 0;
  std::uint64_t executed_at_server_ = 0;
  std::uint64_t forwarded_ = 0;
  std::uint64_t dropped_ = 0;
  double latency_sum_ = 0.0;
  std::vector<LoadSample> series_;
};

}  // namespace

RunMetrics run_scenario(const ScenarioConfig& config) {
  config.validate();
  Simulation sim(config);
  return sim.run();
}

}  // namespace netoffload
