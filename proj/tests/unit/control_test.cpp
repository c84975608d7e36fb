#include <gtest/gtest.h>

#include <random>

#include "netoffload/control.hpp"
#include "netoffload/error.hpp"

using namespace netoffload;

namespace {

Topology line4() {
  return load_topology("nodes 4 server 3\n0 1 1 1\n1 1 1 0\n2 1 1 0\n3 1 1 0\n0 1 1\n1 2 2\n2 3 1\n");
}

// Cold state: q = 1, so every draw executes.
EstimatorState cold() { return EstimatorState(4); }

// Warm state whose q is exactly 0.5.
EstimatorState half_q() {
  EstimatorState s(2);
  s.record_arrival(0.0);
  s.record_arrival(0.25);
  s.record_completion(0.5, 1.0, 0.0);
  s.record_completion(0.5, 1.0, 0.0);
  return s;
}

}  // namespace

TEST(Strategy, Names) {
  for (const auto* name : {"none", "passive", "proactive"}) EXPECT_EQ(to_string(*parse_strategy(name)), name);
  EXPECT_FALSE(parse_strategy("greedy"));
}

TEST(None, ThresholdIsStrict) {
  EXPECT_EQ(decide_none(0.99, 1.0), AdmissionDecision::execute());
  EXPECT_EQ(decide_none(1.0, 1.0), AdmissionDecision::drop());
}

TEST(Passive, ForwardsAlongPath) {
  const auto t = line4();
  EXPECT_EQ(decide_passive(0.5, 1.0, 1, t), AdmissionDecision::execute());
  EXPECT_EQ(decide_passive(1.0, 1.0, 1, t), AdmissionDecision::forward_to(2));
  // Last hop before the server drops unless the server executes.
  EXPECT_EQ(decide_passive(1.0, 1.0, 2, t), AdmissionDecision::drop());
  EXPECT_EQ(decide_passive(1.0, 1.0, 2, t, true), AdmissionDecision::forward_to(3));
  EXPECT_EQ(decide_passive(5.0, 1.0, 3, t, true), AdmissionDecision::execute());
}

TEST(Proactive, ColdStateExecutes) {
  NeighborLoadTable table;
  table.update(2, 0.1, 0.0);
  const auto d = decide_proactive(cold(), table, 1.0, 1.0, 0.999, 3, true);
  EXPECT_EQ(d.decision, AdmissionDecision::execute());
  EXPECT_DOUBLE_EQ(d.q, 1.0);
}

TEST(Proactive, DrawAgainstQ) {
  const auto s = half_q();
  const double q = execution_probability(s, 1.0, 1.0);
  ASSERT_GT(q, 0.0);
  ASSERT_LT(q, 1.0);
  NeighborLoadTable table;
  table.update(5, 0.7, 0.0);
  table.update(2, 0.3, 0.0);
  table.update(4, 0.3, 0.0);
  EXPECT_EQ(decide_proactive(s, table, 1.0, 1.0, q * 0.99, 3, true).decision, AdmissionDecision::execute());
  // draw == q does not execute.
  EXPECT_EQ(decide_proactive(s, table, 1.0, 1.0, q, 3, true).decision, AdmissionDecision::forward_to(2));
  EXPECT_EQ(decide_proactive(s, table, 1.0, 1.0, q, 0, true).decision, AdmissionDecision::execute());
  EXPECT_EQ(decide_proactive(s, table, 1.0, 1.0, q, 0, false).decision, AdmissionDecision::drop());
  EXPECT_EQ(decide_proactive(s, NeighborLoadTable{}, 1.0, 1.0, q, 3, true).decision, AdmissionDecision::drop());
  EXPECT_THROW(decide_proactive(s, table, 1.0, 1.0, 1.5, 3, true), PreconditionError);
}

// Property: the empirical execute fraction tracks q.
TEST(ProactiveProperty, ExecuteFrequencyMatchesQ) {
  const auto s = half_q();
  const double q = execution_probability(s, 1.0, 1.0);
  NeighborLoadTable table;
  table.update(1, 0.0, 0.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 20000;
  int executed = 0;
  for (int i = 0; i < n; ++i)
    executed += decide_proactive(s, table, 1.0, 1.0, u(rng), 3, true).decision.kind == AdmissionDecision::Kind::execute;
  EXPECT_NEAR(executed / static_cast<double>(n), q, 4.0 * std::sqrt(q * (1 - q) / n));
}

TEST(NeighborTable, NewerWins) {
  NeighborLoadTable t;
  EXPECT_TRUE(t.update(1, 0.5, 1.0));
  EXPECT_FALSE(t.update(1, 0.9, 1.0));
  EXPECT_FALSE(t.update(1, 0.9, 0.5));
  EXPECT_DOUBLE_EQ(t.get(1)->normalized_load, 0.5);
  EXPECT_TRUE(t.update(1, 0.2, 2.0));
  EXPECT_DOUBLE_EQ(t.get(1)->normalized_load, 0.2);
  t.erase(1);
  EXPECT_FALSE(t.get(1));
  EXPECT_FALSE(lightest_load_neighbor(t));
}

TEST(NeighborTableProperty, LightestMatchesScan) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    NeighborLoadTable t;
    std::map<NodeId, double> loads;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      const NodeId id = static_cast<NodeId>(rng() % 20);
      const double load = static_cast<double>(rng() % 4) / 4.0;  // coarse, to force ties
      if (t.update(id, load, static_cast<double>(i + 1))) loads[id] = load;
    }
    NodeId best = loads.begin()->first;
    for (const auto& [id, load] : loads)
      if (load < loads[best]) best = id;
    EXPECT_EQ(*lightest_load_neighbor(t), best);
  }
}

TEST(Gossip, OneMessagePerNeighborWithLinkDelay) {
  const auto t = line4();
  const auto msgs = publish_load(t, 1, 0.4, 0.010);
  ASSERT_EQ(msgs.size(), 2u);
  for (const auto& m : msgs) {
    EXPECT_EQ(m.from, 1);
    EXPECT_DOUBLE_EQ(m.as_of, 0.010);
    EXPECT_DOUBLE_EQ(m.normalized_load, 0.4);
  }
  EXPECT_EQ(msgs[0].to, 0);
  EXPECT_DOUBLE_EQ(msgs[0].deliver_at, 0.011);
  EXPECT_EQ(msgs[1].to, 2);
  EXPECT_DOUBLE_EQ(msgs[1].deliver_at, 0.012);
}
