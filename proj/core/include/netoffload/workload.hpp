#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "netoffload/topology.hpp"

namespace netoffload {

using ServiceId = int;

struct ServiceSpec {
  ServiceId id = 0;
  double mean_exec_time = 0.01;  // t_j, seconds
  double cpu_cost = 0.1;         // c_j, CPU units while running
  double mem_cost = 0.0;         // m_j
  double popularity_weight = 1.0;
};

// A set of services with normalized popularity p_j.
class ServiceCatalog {
 public:
  ServiceCatalog() = default;
  explicit ServiceCatalog(std::vector<ServiceSpec> services);

  std::span<const ServiceSpec> services() const { return services_; }
  const ServiceSpec& at(ServiceId id) const;
  bool empty() const { return services_.empty(); }
  // p_j, same order as services(); sums to 1 for a non-empty catalog.
  std::span<const double> popularity() const { return popularity_; }
  // Index into services() drawn by popularity.
  std::size_t sample_index(std::mt19937_64& rng) const;

 private:
  std::vector<ServiceSpec> services_;
  std::vector<double> popularity_;
  mutable std::discrete_distribution<std::size_t> pick_;
};

ServiceCatalog catalog_from_json(const nlohmann::json& doc);
nlohmann::json catalog_to_json(const ServiceCatalog& catalog);

struct Request {
  std::uint64_t id = 0;
  ServiceId service_id = 0;
  NodeId origin_node = 0;
  double arrival_time = 0.0;    // seconds, entry into the network
  int ttl_remaining = 0;        // forwarding hops still allowed
  double first_hop_time = 0.0;  // seconds
  double demand = 0.0;          // CPU work in seconds at full speed
  double cpu_cost = 0.0;
  double mem_cost = 0.0;
  double path_delay_ms = 0.0;  // link delay accumulated so far
};

// ---------------------------------------------------------------------------
// C3PO statistics block.
//
// Arrival and completion events have their own cursors. Memory use depends on
// k only. lambda() is the un-inflated mean rate; effective_lambda() adds the
// conservative-mode increment used by the admission probability.
class EstimatorState {
 public:
  explicit EstimatorState(std::size_t k = 128);

  // Throws PreconditionError on a timestamp older than the previous one.
  void record_arrival(double timestamp);
  // Throws PreconditionError when exec_time <= 0.
  void record_completion(double exec_time, double cpu, double mem);

  // (n-1) / (newest - oldest) over the n <= k stored timestamps, kept in O(1)
  // through a running interval sum. nullopt until two distinct samples exist.
  std::optional<double> mean_arrival_rate() const;
  // The same quantity by scanning the buffer; used as a cross-check.
  std::optional<double> mean_arrival_rate_rescan() const;

  std::size_t capacity() const { return k_; }
  std::size_t arrivals_buffered() const { return arrivals_stored_; }
  std::size_t arrival_index() const { return arrival_index_; }
  std::size_t completion_index() const { return completion_index_; }
  std::uint64_t completion_wraps() const { return completion_wraps_; }

  double lambda() const { return lambda_; }
  double lambda_prev() const { return lambda_prev_; }
  double delta_lambda() const { return delta_lambda_; }
  double effective_lambda() const { return lambda_ + delta_lambda_; }
  bool conservative() const { return delta_lambda_ > 0.0; }
  double mu() const { return mu_; }
  double cpu_avg() const { return cpu_avg_; }
  double mem_avg() const { return mem_avg_; }
  double interval_sum() const { return interval_sum_; }

  // Buffer full and at least one completion wrap, so lambda and mu exist.
  bool warm() const;

  // Test seams: preload smoothed values.
  void set_smoothed(double mu, double cpu_avg, double mem_avg);
  void set_lambda(double lambda, double lambda_prev);

 private:
  std::size_t k_;
  std::vector<double> buf_lambda_;
  std::vector<double> buf_mu_;
  std::vector<double> buf_cpu_;
  std::vector<double> buf_mem_;
  std::size_t arrival_index_ = 0;
  std::size_t completion_index_ = 0;
  std::size_t arrivals_stored_ = 0;
  std::uint64_t completion_wraps_ = 0;
  double interval_sum_ = 0.0;
  double lambda_ = 0.0;
  double lambda_prev_ = 0.0;
  double delta_lambda_ = 0.0;
  double mu_ = 0.0;
  double cpu_avg_ = 0.0;
  double mem_avg_ = 0.0;
};

// l = rho / (1 - rho). nullopt when rho >= 1 (unstable system).
// Throws PreconditionError for negative rho.
std::optional<double> expected_queue_length(double rho);

// q = min( min(c'/(c'+c''), m'/(m'+m'')) * mu / lambda_eff, 1 ).
double execution_probability(double lambda_eff, double mu, double cpu_capacity, double cpu_avg, double mem_capacity,
                             double mem_avg);
// Uses the state's effective lambda; returns 1 while the state is cold.
double execution_probability(const EstimatorState& state, double cpu_capacity, double mem_capacity);

// ---------------------------------------------------------------------------
// Arrivals

struct JitterSpec {
  double start = 0.0;     // seconds
  double duration = 0.0;  // seconds
  double rate_multiplier = 1.0;
};

std::vector<JitterSpec> jitters_from_json(const nlohmann::json& doc);
nlohmann::json jitters_to_json(std::span<const JitterSpec> jitters);

struct ArrivalEvent {
  double time = 0.0;
  ServiceId service_id = 0;
};

// Piecewise-homogeneous Poisson process: base_rate outside jitter windows,
// base_rate * multiplier inside. Lazily generated; deterministic per seed.
class PoissonStream {
 public:
  PoissonStream(double base_rate, std::vector<JitterSpec> jitters, double horizon, const ServiceCatalog& catalog,
                std::uint64_t seed, double start = 0.0);

  // Next arrival strictly before the horizon, or nullopt when exhausted.
  std::optional<ArrivalEvent> next();
  double rate_at(double t) const;

 private:
  double segment_end(double t) const;

  double base_rate_;
  std::vector<JitterSpec> jitters_;
  double horizon_;
  const ServiceCatalog* catalog_;
  std::mt19937_64 rng_;
  double clock_ = 0.0;
};

// Validates jitters (inside horizon, non-overlapping, positive multipliers).
void validate_jitters(std::span<const JitterSpec> jitters, double horizon);

std::vector<ArrivalEvent> poisson_stream(double base_rate, std::span<const JitterSpec> jitters, double horizon,
                                         const ServiceCatalog& catalog, std::uint64_t seed);

}  // namespace netoffload
