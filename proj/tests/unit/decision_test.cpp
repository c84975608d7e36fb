#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "netoffload/decision.hpp"
#include "netoffload/error.hpp"

using namespace netoffload;

namespace {

MethodProfile method(double invocations, double t_local_ms, double in = 0.0, double out = 0.0, double energy = 0.0) {
  MethodProfile m;
  m.name = "m";
  m.invocations = invocations;
  m.t_local = t_local_ms / 1000.0;
  m.in_bytes = in;
  m.out_bytes = out;
  m.energy_local = energy;
  return m;
}

ClassProfile profile_of(std::vector<MethodProfile> methods, bool boundary) {
  ClassProfile p{"C", std::move(methods), {}};
  p.boundary.assign(p.methods.size(), boundary);
  return p;
}

NetworkConditions cond(double rtt_ms, double speedup, double bandwidth = 1e6) {
  return {rtt_ms / 1000.0, bandwidth, speedup};
}

struct Sums {
  double local_time = 0, remote_time = 0, local_energy = 0, remote_energy = 0;
};

// Straight-line evaluation of both inequalities.
Sums sums_oracle(const ClassProfile& p, const NetworkConditions& c, const EnergyModel& e) {
  double total = 0;
  for (const auto& m : p.methods) total += m.invocations;
  Sums s;
  for (std::size_t i = 0; i < p.methods.size(); ++i) {
    const auto& m = p.methods[i];
    const double f = total > 0 ? m.invocations / total : 1.0 / p.methods.size();
    const double speed = m.cpu_scale_hint ? *m.cpu_scale_hint : c.cpu_speedup;
    const double t_off = m.t_local / speed;
    const double transfer = (m.in_bytes + m.out_bytes) / c.bandwidth;
    s.local_time += f * m.t_local;
    s.local_energy += f * m.energy_local;
    s.remote_time += f * (t_off + (p.boundary[i] ? c.rtt + transfer : 0.0));
    if (p.boundary[i])
      s.remote_energy += f * (m.in_bytes * e.energy_per_tx_byte + m.out_bytes * e.energy_per_rx_byte +
                              (c.rtt + transfer + t_off) * e.energy_idle_per_second);
  }
  return s;
}

ClassProfile random_profile(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 1 + static_cast<int>(rng() % 5);
  std::vector<MethodProfile> ms;
  for (int i = 0; i < n; ++i) {
    auto m = method(static_cast<double>(rng() % 100), 200.0 * u(rng), 1e5 * u(rng), 1e5 * u(rng), 0.05 * u(rng));
    if (rng() % 4 == 0) m.cpu_scale_hint = 0.5 + 10.0 * u(rng);
    ms.push_back(m);
  }
  ClassProfile p{"C", ms, {}};
  for (int i = 0; i < n; ++i) p.boundary.push_back(rng() % 3 != 0);
  return p;
}

// Ui (pinned) - Heavy - Light chain.
CallGraph heavy_ui(double heavy_ms, double light_ms) {
  CallGraph g;
  g.add_class({"app.Ui", {std::string(kPinnedTag)}, {method(10, 1.0, 0, 0, 0.001)}});
  g.add_class({"app.Heavy", {}, {method(10, heavy_ms, 100, 100, 0.01)}});
  g.add_class({"app.Light", {}, {method(10, light_ms, 100, 100, 0.01)}});
  g.add_edge(0, 1, 5.0);
  g.add_edge(1, 2, 5.0);
  return g;
}

}  // namespace

TEST(ClassValidTime, Examples) {
  EXPECT_FALSE(class_valid_time(profile_of({method(1, 10)}, true), cond(15, 10)));
  EXPECT_TRUE(class_valid_time(profile_of({method(1, 100)}, true), cond(15, 10)));
  // Heavy method compensates for a trivial one that loses on its own.
  const auto mixed = profile_of({method(9, 50), method(1, 0.1)}, true);
  EXPECT_TRUE(class_valid_time(mixed, cond(15, 10)));
  EXPECT_FALSE(class_valid_time(profile_of({method(1, 0.1)}, true), cond(15, 10)));
  EXPECT_FALSE(class_valid_time(profile_of({}, true), cond(0, 10)));
}

TEST(ClassValidTime, EqualityStaysLocal) {
  // 20 ms local vs 10 ms remote + 10 ms RTT.
  EXPECT_FALSE(class_valid_time(profile_of({method(1, 20)}, true), cond(10, 2)));
}

TEST(ClassValidTime, NonBoundaryIgnoresNetwork) {
  EXPECT_TRUE(class_valid_time(profile_of({method(1, 10)}, false), cond(1000, 2, 1.0)));
}

TEST(ClassValidEnergy, Examples) {
  const EnergyModel model{2e-7, 1e-7, 0.0};
  EXPECT_TRUE(class_valid_energy(profile_of({method(1, 5, 0, 0, 0.01)}, true), cond(15, 1), model));
  EXPECT_FALSE(class_valid_energy(profile_of({method(1, 5, 1e12, 0, 0.01)}, true), cond(15, 1), model));
  EXPECT_FALSE(class_valid_energy(profile_of({}, true), cond(15, 1), model));
}

TEST(Frequencies, UniformWhenUnobserved) {
  const auto p = profile_of({method(0, 1), method(0, 2)}, true);
  EXPECT_EQ(p.frequencies(), (std::vector<double>{0.5, 0.5}));
}

TEST(DecisionProperty, MatchesStraightLineOracle) {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_profile(rng);
    const NetworkConditions c{0.05 * u(rng), 1e4 + 1e7 * u(rng), 0.5 + 10 * u(rng)};
    const EnergyModel e{1e-6 * u(rng), 1e-6 * u(rng), 0.5 * u(rng)};
    const auto s = sums_oracle(p, c, e);
    EXPECT_EQ(class_valid_time(p, c), s.local_time > s.remote_time);
    EXPECT_EQ(class_valid_energy(p, c, e), s.local_energy > s.remote_energy);
  }
}

TEST(DecisionProperty, MonotoneInRttAndBandwidth) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const auto p = random_profile(rng);
    const NetworkConditions c{0.05 * u(rng), 1e4 + 1e7 * u(rng), 0.5 + 10 * u(rng)};
    const bool base = class_valid_time(p, c);
    auto worse = c;
    worse.rtt *= 2.0;
    worse.bandwidth *= 0.5;
    if (!base) {
      EXPECT_FALSE(class_valid_time(p, worse));
    }
  }
}

TEST(DecisionProperty, IdealNetworkIsAlwaysTimeValid) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    auto p = random_profile(rng);
    for (auto& m : p.methods) {
      m.cpu_scale_hint.reset();
      m.t_local += 1e-3;
    }
    p.boundary.assign(p.methods.size(), true);
    EXPECT_TRUE(class_valid_time(p, {0.0, std::numeric_limits<double>::infinity(), 2.0}));
  }
}

TEST(ClassProfile, BoundaryFollowsCut) {
  const auto g = heavy_ui(100, 100);
  const auto p = class_profile(g, 1, {false, true, true});
  EXPECT_EQ(p.boundary, std::vector<bool>{true});
  const auto q = class_profile(g, 2, {false, true, true});
  EXPECT_EQ(q.boundary, std::vector<bool>{false});
}

TEST(SelectPartition, FirstMatchAndPinned) {
  const auto g = heavy_ui(100, 100);
  const auto sets = std::vector<PartitionSet>{make_partition_set(g, {{0}, {1, 2}}), make_partition_set(g, {{0}, {1}, {2}})};
  const auto v = select_partition(sets, g, cond(10, 10), EnergyModel{});
  ASSERT_TRUE(v.chosen_n);
  EXPECT_EQ(*v.chosen_n, 2);
  EXPECT_EQ(v.offload_classes, (std::vector<int>{1, 2}));
  EXPECT_FALSE(v.per_class_fallback);

  const auto pinned = std::vector<PartitionSet>{make_partition_set(g, {{0, 1, 2}})};
  auto all_pinned = g;
  for (int i = 0; i < 3; ++i) all_pinned.vertex(i).tags.insert(std::string(kPinnedTag));
  EXPECT_TRUE(select_partition(pinned, all_pinned, cond(10, 10), EnergyModel{}).local_only());
  EXPECT_TRUE(select_partition({}, g, cond(10, 10), EnergyModel{}).local_only());
}

TEST(SelectPartition, ModeAllNeedsEveryCluster) {
  // Heavy passes alone; Light (0.5 ms) never beats a 10 ms RTT.
  const auto g = heavy_ui(100, 0.5);
  const auto sets = std::vector<PartitionSet>{make_partition_set(g, {{0}, {1}, {2}})};
  const auto any = select_partition(sets, g, cond(10, 10), EnergyModel{}, SetValidity::any);
  EXPECT_EQ(any.offload_classes, std::vector<int>{1});
  const auto all = select_partition(sets, g, cond(10, 10), EnergyModel{}, SetValidity::all);
  EXPECT_TRUE(all.per_class_fallback);
}

// Exhaustive oracle: the fallback offloads exactly the unpinned classes that
// are valid as singletons, when no listed set qualifies.
TEST(SelectPartition, PerClassFallbackMatchesOracle) {
  const auto g = heavy_ui(100, 0.5);
  // Only offloadable cluster is Light alone, which loses to the RTT.
  const auto sets = std::vector<PartitionSet>{make_partition_set(g, {{0, 1}, {2}})};
  const auto c = cond(10, 10);
  const auto v = select_partition(sets, g, c, EnergyModel{});
  std::vector<int> expected;
  for (int i = 0; i < g.size(); ++i) {
    if (g.vertex(i).pinned()) continue;
    std::vector<bool> remote(g.size(), false);
    remote[i] = true;
    const auto p = class_profile(g, i, remote);
    const auto s = sums_oracle(p, c, EnergyModel{});
    if (s.local_time > s.remote_time && s.local_energy > s.remote_energy) expected.push_back(i);
  }
  EXPECT_EQ(expected, std::vector<int>{1});
  EXPECT_TRUE(v.per_class_fallback);
  EXPECT_EQ(*v.chosen_n, g.size());
  EXPECT_EQ(v.offload_classes, expected);
}

TEST(SelectPartitionProperty, NeverOffloadsPinned) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 6);
    CallGraph g;
    for (int i = 0; i < n; ++i) {
      ClassVertex v{"c" + std::to_string(i), {}, {method(1 + rng() % 10, 100 * u(rng), 1e3 * u(rng), 1e3 * u(rng), 0.01)}};
      if (rng() % 3 == 0) v.tags.insert(std::string(kPinnedTag));
      g.add_class(v);
    }
    for (int i = 1; i < n; ++i) g.add_edge(static_cast<int>(rng() % i), i, 1.0 + rng() % 5);
    const auto sets = enumerate_partition_sets(g).sets;
    const auto v = select_partition(sets, g, cond(20 * u(rng), 1 + 5 * u(rng)), EnergyModel{1e-7, 1e-7, 0.0});
    for (int c : v.offload_classes) EXPECT_FALSE(g.vertex(c).pinned());
    EXPECT_EQ(v.local_only(), v.offload_classes.empty());
  }
}

TEST(LatencyWindow, KeepsLastThree) {
  LatencyWindow w;
  for (double ms : {10.0, 20.0, 30.0}) w.push(ms / 1000.0, 0.0);
  w = update_latency_window(w, 0.040, 1.0);
  EXPECT_EQ(w.samples(), (std::deque<double>{0.020, 0.030, 0.040}));
  EXPECT_NEAR(*w.estimate(), 0.030, 1e-15);
  EXPECT_EQ(w.last_update(), 1.0);
  EXPECT_THROW(w.push(-1.0, 2.0), ValidationError);

  LatencyWindow one;
  EXPECT_FALSE(one.estimate());
  one.push(0.007, 0.0);
  EXPECT_DOUBLE_EQ(*one.estimate(), 0.007);
}

TEST(LatencyWindow, StepChangeNeedsThreeSamples) {
  LatencyWindow w;
  for (int i = 0; i < 3; ++i) w.push(0.010, i);
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT(*w.estimate(), 0.050 - 1e-12);
    w.push(0.050, 3 + i);
  }
  EXPECT_DOUBLE_EQ(*w.estimate(), 0.050);
}

TEST(EnergyModel, DataFileAndValidation) {
  const auto m = load_energy_model(std::filesystem::path(NETOFFLOAD_DATA_DIR) / "energy_model.json");
  EXPECT_DOUBLE_EQ(m.energy_per_tx_byte, 2e-7);
  EXPECT_THROW(energy_model_from_json(nlohmann::json{{"energy_per_tx_byte", -1.0}}), ValidationError);
  EXPECT_THROW(select_partition({}, CallGraph{}, {-1.0, 1.0, 1.0}, EnergyModel{}), ValidationError);
}

TEST(Verdict, JsonShape) {
  const auto g = heavy_ui(100, 100);
  const auto v = select_partition({make_partition_set(g, {{0}, {1, 2}})}, g, cond(10, 10), EnergyModel{});
  const auto j = verdict_to_json(g, v);
  EXPECT_EQ(j.at("chosen_N"), 2);
  EXPECT_EQ(j.at("local_only"), false);
  EXPECT_EQ(j.at("offload_classes"), (nlohmann::json{"app.Heavy", "app.Light"}));
  EXPECT_TRUE(j.at("per_class_validity").at("app.Heavy").at("valid").get<bool>());
}
