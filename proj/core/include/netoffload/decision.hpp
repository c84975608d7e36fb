#pragma once

#include <cstddef>
#include <deque>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "netoffload/partition.hpp"

namespace netoffload {

struct NetworkConditions {
  double rtt = 0.0;           // seconds
  double bandwidth = 1.0e6;   // bytes per second
  double cpu_speedup = 1.0;   // remote over local CPU speed

  // Throws ValidationError.
  void validate() const;
};

struct EnergyModel {
  double energy_per_tx_byte = 0.0;      // joules per byte sent
  double energy_per_rx_byte = 0.0;      // joules per byte received
  double energy_idle_per_second = 0.0;  // joules per second spent waiting

  void validate() const;
};

EnergyModel energy_model_from_json(const nlohmann::json& doc);
EnergyModel load_energy_model(const std::filesystem::path& path);

// Rolling RTT estimate over the last three observations.
class LatencyWindow {
 public:
  static constexpr std::size_t kCapacity = 3;

  // Throws ValidationError for a negative or non-finite sample.
  void push(double rtt, double now);
  // Arithmetic mean of the stored samples.
  std::optional<double> estimate() const;
  const std::deque<double>& samples() const { return samples_; }
  std::optional<double> last_update() const { return last_update_; }

 private:
  std::deque<double> samples_;
  std::optional<double> last_update_;
};

LatencyWindow update_latency_window(LatencyWindow window, double sample_rtt, double now);

struct ClassProfile {
  std::string name;
  std::vector<MethodProfile> methods;
  std::vector<bool> boundary;  // per method

  // f_m; uniform when no invocations were observed.
  std::vector<double> frequencies() const;
};

// Boundary flags for `vertex` when the classes marked in `remote` run
// remotely: a method is boundary when its class has a call edge crossing the
// local/remote cut, unless the method carries an explicit override.
ClassProfile class_profile(const CallGraph& graph, int vertex, const std::vector<bool>& remote);

double offload_time(const MethodProfile& method, const NetworkConditions& cond);

// Sum f_m t_local > sum f_m (t_offload + [boundary] (RTT + (i + o) / r)).
bool class_valid_time(const ClassProfile& profile, const NetworkConditions& cond);
// Sum f_m E_local > sum over boundary methods of
// f_m (i e_tx + o e_rx + wait e_idle), wait = RTT + (i + o) / r + t_offload.
bool class_valid_energy(const ClassProfile& profile, const NetworkConditions& cond, const EnergyModel& model);

enum class SetValidity {
  any,  // a set qualifies when at least one offloadable cluster passes
  all,  // every offloadable cluster must pass
};

struct ClassValidity {
  int vertex = 0;
  bool time = false;
  bool energy = false;
  bool valid() const { return time && energy; }
};

struct OffloadVerdict {
  std::optional<int> chosen_n;  // empty: run everything locally
  bool per_class_fallback = false;
  std::vector<int> offload_classes;         // ascending
  std::vector<ClassValidity> per_class;     // classes evaluated for the verdict

  bool local_only() const { return !chosen_n; }
};

// Walks sets in ascending N. Each offloadable cluster is evaluated as the
// sole remote cluster; it survives when all its classes are valid in time and
// energy. The first qualifying set offloads its surviving clusters. Without
// one, every unpinned class is tried alone (N = |V|); failing that the
// verdict is local-only.
OffloadVerdict select_partition(const std::vector<PartitionSet>& sets, const CallGraph& graph,
                                const NetworkConditions& cond, const EnergyModel& model,
                                SetValidity mode = SetValidity::any);

nlohmann::json verdict_to_json(const CallGraph& graph, const OffloadVerdict& verdict);

}  // namespace netoffload
