#include "netoffload/workload.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "netoffload/error.hpp"

namespace netoffload {

// ---------------------------------------------------------------------------
// ServiceCatalog

ServiceCatalog::ServiceCatalog(std::vector<ServiceSpec> services) : services_(std::move(services)) {
  std::set<ServiceId> ids;
  double total = 0.0;
  for (const auto& s : services_) {
    if (!ids.insert(s.id).second) throw ValidationError(fmt::format("duplicate service id {}", s.id));
    if (!(s.mean_exec_time > 0.0)) throw ValidationError(fmt::format("service {}: mean_exec_time must be > 0", s.id));
    if (!(s.cpu_cost >= 0.0)) throw ValidationError(fmt::format("service {}: cpu_cost must be >= 0", s.id));
    if (!(s.mem_cost >= 0.0)) throw ValidationError(fmt::format("service {}: mem_cost must be >= 0", s.id));
    if (!(s.popularity_weight >= 0.0))
      throw ValidationError(fmt::format("service {}: popularity_weight must be >= 0", s.id));
    total += s.popularity_weight;
  }
  if (!services_.empty() && !(total > 0.0)) throw ValidationError("service popularity weights sum to zero");
  popularity_.reserve(services_.size());
  for (const auto& s : services_) popularity_.push_back(s.popularity_weight / total);
  pick_ = std::discrete_distribution<std::size_t>(popularity_.begin(), popularity_.end());
}

const ServiceSpec& ServiceCatalog::at(ServiceId id) const {
  for (const auto& s : services_)
    if (s.id == id) return s;
  throw PreconditionError(fmt::format("unknown service {}", id));
}

std::size_t ServiceCatalog::sample_index(std::mt19937_64& rng) const {
  if (services_.size() == 1) return 0;
  return pick_(rng);
}

ServiceCatalog catalog_from_json(const nlohmann::json& doc) {
  const auto& list = doc.is_object() && doc.contains("services") ? doc.at("services") : doc;
  if (!list.is_array()) throw ValidationError("service catalog must be an array of service records");
  std::vector<ServiceSpec> out;
  for (const auto& item : list) {
    ServiceSpec s;
    try {
      s.id = item.at("id").get<int>();
      s.mean_exec_time = item.at("mean_exec_time").get<double>();
      s.cpu_cost = item.value("cpu_cost", s.cpu_cost);
      s.mem_cost = item.value("mem_cost", s.mem_cost);
      s.popularity_weight = item.value("popularity_weight", s.popularity_weight);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("service record: {}", e.what()));
    }
    out.push_back(s);
  }
  return ServiceCatalog(std::move(out));
}

nlohmann::json catalog_to_json(const ServiceCatalog& catalog) {
  auto list = nlohmann::json::array();
  for (const auto& s : catalog.services())
    list.push_back({{"id", s.id},
                    {"mean_exec_time", s.mean_exec_time},
                    {"cpu_cost", s.cpu_cost},
                    {"mem_cost", s.mem_cost},
                    {"popularity_weight", s.popularity_weight}});
  return list;
}

// ---------------------------------------------------------------------------
// EstimatorState

EstimatorState::EstimatorState(std::size_t k)
    : k_(k), buf_lambda_(k, 0.0), buf_mu_(k, 0.0), buf_cpu_(k, 0.0), buf_mem_(k, 0.0) {
  if (k < 2) throw ValidationError("estimator buffer size k must be >= 2");
}

void EstimatorState::record_arrival(double timestamp) {
  const std::size_t i = arrival_index_;
  const std::size_t prev = (i + k_ - 1) % k_;
  if (arrivals_stored_ > 0 && timestamp < buf_lambda_[prev])
    throw PreconditionError(
        fmt::format("arrival timestamp {} precedes previous arrival {}", timestamp, buf_lambda_[prev]));

  // y: interval leaving the buffer with the overwritten oldest stamp.
  // z: interval joining it with the new stamp.
  const double y = arrivals_stored_ == k_ ? buf_lambda_[(i + 1) % k_] - buf_lambda_[i] : 0.0;
  const double z = arrivals_stored_ > 0 ? timestamp - buf_lambda_[prev] : 0.0;
  interval_sum_ = interval_sum_ - y + z;
  buf_lambda_[i] = timestamp;
  arrivals_stored_ = std::min(arrivals_stored_ + 1, k_);

  if (const auto rate = mean_arrival_rate()) {
    lambda_ = *rate;
    delta_lambda_ = std::max(0.0, lambda_ - lambda_prev_);
  }

  arrival_index_ = (i + 1) % k_;
  if (arrival_index_ == 0) lambda_prev_ = 0.5 * (lambda_prev_ + lambda_);
}

std::optional<double> EstimatorState::mean_arrival_rate() const {
  if (arrivals_stored_ < 2 || !(interval_sum_ > 0.0)) return std::nullopt;
  return static_cast<double>(arrivals_stored_ - 1) / interval_sum_;
}

std::optional<double> EstimatorState::mean_arrival_rate_rescan() const {
  if (arrivals_stored_ < 2) return std::nullopt;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t j = 0; j < arrivals_stored_; ++j) {
    lo = std::min(lo, buf_lambda_[j]);
    hi = std::max(hi, buf_lambda_[j]);
  }
  if (!(hi > lo)) return std::nullopt;
  return static_cast<double>(arrivals_stored_ - 1) / (hi - lo);
}

void EstimatorState::record_completion(double exec_time, double cpu, double mem) {
  if (!(exec_time > 0.0)) throw PreconditionError(fmt::format("execution time must be > 0, got {}", exec_time));
  const std::size_t i = completion_index_;
  buf_mu_[i] = exec_time;
  buf_cpu_[i] = cpu;
  buf_mem_[i] = mem;
  completion_index_ = (i + 1) % k_;
  if (completion_index_ == 0) {
    const auto n = static_cast<double>(k_);
    const double mean_exec = std::accumulate(buf_mu_.begin(), buf_mu_.end(), 0.0) / n;
    mu_ = 0.5 * (mu_ + 1.0 / mean_exec);
    cpu_avg_ = 0.5 * (cpu_avg_ + std::accumulate(buf_cpu_.begin(), buf_cpu_.end(), 0.0) / n);
    mem_avg_ = 0.5 * (mem_avg_ + std::accumulate(buf_mem_.begin(), buf_mem_.end(), 0.0) / n);
    ++completion_wraps_;
  }
}

bool EstimatorState::warm() const {
  return arrivals_stored_ == k_ && completion_wraps_ > 0 && mu_ > 0.0 && lambda_ > 0.0;
}

void EstimatorState::set_smoothed(double mu, double cpu_avg, double mem_avg) {
  mu_ = mu;
  cpu_avg_ = cpu_avg;
  mem_avg_ = mem_avg;
  if (completion_wraps_ == 0) completion_wraps_ = 1;
}

void EstimatorState::set_lambda(double lambda, double lambda_prev) {
  lambda_ = lambda;
  lambda_prev_ = lambda_prev;
  delta_lambda_ = std::max(0.0, lambda - lambda_prev);
}

// ---------------------------------------------------------------------------
// Closed forms

std::optional<double> expected_queue_length(double rho) {
  if (!(rho >= 0.0)) throw PreconditionError(fmt::format("utilization must be >= 0, got {}", rho));
  if (rho >= 1.0) return std::nullopt;
  return rho / (1.0 - rho);
}

double execution_probability(double lambda_eff, double mu, double cpu_capacity, double cpu_avg, double mem_capacity,
                             double mem_avg) {
  if (!(lambda_eff > 0.0) || !(mu > 0.0)) return 1.0;
  const double cpu_factor = cpu_capacity / (cpu_capacity + cpu_avg);
  const double mem_factor = mem_capacity / (mem_capacity + mem_avg);
  return std::min(std::min(cpu_factor, mem_factor) * mu / lambda_eff, 1.0);
}

double execution_probability(const EstimatorState& state, double cpu_capacity, double mem_capacity) {
  if (!(cpu_capacity > 0.0) || !(mem_capacity > 0.0))
    throw PreconditionError("node capacities must be positive");
  if (!state.warm()) return 1.0;
  return execution_probability(state.effective_lambda(), state.mu(), cpu_capacity, state.cpu_avg(), mem_capacity,
                               state.mem_avg());
}

// ---------------------------------------------------------------------------
// Arrivals

std::vector<JitterSpec> jitters_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw ValidationError("jitters must be an array");
  std::vector<JitterSpec> out;
  for (const auto& item : doc) {
    try {
      out.push_back({item.at("start_ms").get<double>() / 1000.0, item.at("duration_ms").get<double>() / 1000.0,
                     item.at("rate_multiplier").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("jitter record: {}", e.what()));
    }
  }
  return out;
}

nlohmann::json jitters_to_json(std::span<const JitterSpec> jitters) {
  auto list = nlohmann::json::array();
  for (const auto& j : jitters)
    list.push_back(
        {{"start_ms", j.start * 1000.0}, {"duration_ms", j.duration * 1000.0}, {"rate_multiplier", j.rate_multiplier}});
  return list;
}

void validate_jitters(std::span<const JitterSpec> jitters, double horizon) {
  std::vector<JitterSpec> sorted(jitters.begin(), jitters.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& j = sorted[i];
    if (!(j.start >= 0.0) || !(j.duration > 0.0)) throw ValidationError("jitter windows need start >= 0 and duration > 0");
    if (j.start + j.duration > horizon + 1e-12) throw ValidationError("jitter window extends past the horizon");
    if (!(j.rate_multiplier > 0.0)) throw ValidationError("jitter rate multiplier must be > 0");
    if (i > 0 && sorted[i - 1].start + sorted[i - 1].duration > j.start)
      throw ValidationError("overlapping jitter windows");
  }
}

PoissonStream::PoissonStream(double base_rate, std::vector<JitterSpec> jitters, double horizon,
                             const ServiceCatalog& catalog, std::uint64_t seed, double start)
    : base_rate_(base_rate),
      jitters_(std::move(jitters)),
      horizon_(horizon),
      catalog_(&catalog),
      rng_(seed),
      clock_(start) {
  if (!(base_rate > 0.0)) throw ValidationError("base arrival rate must be > 0");
  if (!(horizon >= 0.0)) throw ValidationError("horizon must be >= 0");
  if (catalog.empty()) throw ValidationError("service catalog is empty");
  validate_jitters(jitters_, horizon);
  std::sort(jitters_.begin(), jitters_.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
}

double PoissonStream::rate_at(double t) const {
  for (const auto& j : jitters_)
    if (t >= j.start && t < j.start + j.duration) return base_rate_ * j.rate_multiplier;
  return base_rate_;
}

double PoissonStream::segment_end(double t) const {
  for (const auto& j : jitters_) {
    if (t < j.start) return j.start;
    if (t < j.start + j.duration) return j.start + j.duration;
  }
  return horizon_;
}

std::optional<ArrivalEvent> PoissonStream::next() {
  // Memorylessness lets us restart the exponential clock at segment borders.
  while (clock_ < horizon_) {
    const double rate = rate_at(clock_);
    const double end = std::min(segment_end(clock_), horizon_);
    std::exponential_distribution<double> gap(rate);
    const double t = clock_ + gap(rng_);
    if (t < end) {
      clock_ = t;
      const auto idx = catalog_->sample_index(rng_);
      return ArrivalEvent{t, catalog_->services()[idx].id};
    }
    clock_ = end;
  }
  return std::nullopt;
}

std::vector<ArrivalEvent> poisson_stream(double base_rate, std::span<const JitterSpec> jitters, double horizon,
                                         const ServiceCatalog& catalog, std::uint64_t seed) {
  PoissonStream stream(base_rate, {jitters.begin(), jitters.end()}, horizon, catalog, seed);
  std::vector<ArrivalEvent> out;
  while (auto ev = stream.next()) out.push_back(*ev);
  return out;
}

}  // namespace netoffload
