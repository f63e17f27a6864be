#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "qnetsim/harness.hpp"
#include "qnetsim/trace.hpp"
#include "test_util.hpp"

using namespace qnetsim;

namespace {

Scenario small(PolicyKind policy, GemSync gem = GemSync::Distributed) {
  Scenario s;
  s.name = "small";
  s.sim.params.nodes = 40;
  s.sim.params.density = 0.15;
  s.sim.params.duration = SimTime::seconds(6);
  s.sim.policy = policy;
  s.sim.gem = gem;
  s.workload.requests = 5;
  s.workload.interval = SimTime::seconds(1);
  s.seeds = 2;
  return s;
}

struct Traced {
  SimMetrics m;
  std::vector<nlohmann::json> lines;
  TraceReport rep;
};

Traced traced(const Scenario& s, std::uint64_t seed) {
  std::stringstream buf;
  Traced t;
  t.m = run_seed(s, seed, jsonl_sink(buf), 2).metrics;
  std::string line;
  std::stringstream copy(buf.str());
  while (std::getline(copy, line)) t.lines.push_back(nlohmann::json::parse(line));
  t.rep = validate_trace(buf);
  return t;
}

}  // namespace

TEST(Sim, TracesValidForEveryPolicy) {
  for (auto k : {PolicyKind::OldestFirst, PolicyKind::YoungestFirst, PolicyKind::LongestHop, PolicyKind::ShortestHop,
                 PolicyKind::Scoring, PolicyKind::FixedTree, PolicyKind::SwapAsap, PolicyKind::Connectionless}) {
    const auto t = traced(small(k), 1);
    EXPECT_TRUE(t.rep.ok()) << to_string(k) << ": " << (t.rep.errors.empty() ? "" : t.rep.errors[0]);
    EXPECT_EQ(t.rep.deliveries, t.m.delivered) << to_string(k);
    EXPECT_LE(t.rep.max_slot_use, 5);
    if (k != PolicyKind::Connectionless) EXPECT_GT(t.m.delivered, 0) << to_string(k);
  }
  const auto c = traced(small(PolicyKind::OldestFirst, GemSync::Centralized), 1);
  EXPECT_TRUE(c.rep.ok());
  EXPECT_GT(c.m.delivered, 0);
  EXPECT_GT(c.m.classical_messages, 0);
}

// Without purification every EP is a link herald or a swap product, and each
// one ends exactly once unless still live at the end.
TEST(Sim, EpConservation) {
  for (auto k : {PolicyKind::Scoring, PolicyKind::FixedTree, PolicyKind::SwapAsap}) {
    const auto t = traced(small(k), 2);
    ASSERT_TRUE(t.rep.ok());
    EXPECT_EQ(t.m.purifications, 0);
    EXPECT_EQ(t.rep.eps_seen, t.m.link_eps + t.m.swaps_succeeded) << to_string(k);
    EXPECT_LE(t.rep.eps_ended, t.rep.eps_seen);
    // a failed swap discards both inputs; swaps locked just before the end never run
    std::int64_t failed = 0;
    for (const auto& j : t.lines) failed += j["ev"] == "swap" && !j["ok"].get<bool>();
    EXPECT_LE(t.rep.swaps, t.m.swaps_attempted) << to_string(k);
    EXPECT_EQ(t.m.discard_swap_fail, 2 * failed) << to_string(k);
    EXPECT_EQ(t.rep.swaps - failed, t.m.swaps_succeeded) << to_string(k);
  }
}

TEST(Sim, Deterministic) {
  auto s = small(PolicyKind::Scoring);
  std::stringstream a, b;
  write_runs_csv(a, s, run_scenario(s));
  write_runs_csv(b, s, run_scenario(s));
  EXPECT_EQ(a.str(), b.str());
  std::stringstream ta, tb;
  run_seed(s, 3, jsonl_sink(ta), 2);
  run_seed(s, 3, jsonl_sink(tb), 2);
  EXPECT_EQ(ta.str(), tb.str());
}

TEST(Sim, FixedCountCompletes) {
  auto s = small(PolicyKind::Scoring);
  s.workload.requirement = FixedCount{3};
  const NetworkGraph g = scenario_graph(s, 1);
  const auto w = scenario_requests(s, g, 1);
  SimConfig cfg = s.sim;
  NetworkSim sim(g, w, cfg);
  const auto m = sim.run();
  for (const auto& r : m.requests) {
    EXPECT_LE(r.delivered, 3);
    if (r.delivered == 3) EXPECT_EQ(r.status, RequestStatus::Completed);
    EXPECT_EQ(sim.lifecycle().status(r.id), r.status);
  }
  EXPECT_GT(m.delivered, 0);
}

// One swap over a three-node chain: the delivered EP is the swap of two link
// EPs that aged for at most the simulated duration.
TEST(Sim, ChainFidelityBounds) {
  SimParams p;
  p.duration = SimTime::seconds(2);
  const auto g = testutil::chain({0, 15, 30}, p);
  Edr e;
  e.id = 1;
  e.src = 0;
  e.dst = 2;
  e.requirement = FixedCount{20};
  for (auto k : {PolicyKind::FixedTree, PolicyKind::Scoring, PolicyKind::OldestFirst}) {
    SimConfig cfg;
    cfg.params = p;
    cfg.policy = k;
    const auto m = simulate(g, {e}, cfg);
    ASSERT_GT(m.delivered, 0);
    const double w0 = p.link_werner();
    const double hi = (1 + 3 * w0 * w0) / 4;
    const double decayed = w0 * w0 * std::exp(-2 * p.depolar_rate * 2.0);
    const double lo = (1 + 3 * decayed) / 4;
    EXPECT_LE(m.mean_fidelity, hi + 1e-12) << to_string(k);
    EXPECT_GE(m.mean_fidelity, lo) << to_string(k);
  }
}

TEST(Sim, MonitorActionsSpacedAndBounded) {
  auto s = small(PolicyKind::Scoring);
  s.sim.params.duration = SimTime::seconds(20);
  s.workload.requests = 3;
  s.workload.requirement = RateMaxFidelity{5000.0};  // unreachable: the monitor escalates
  const auto t = traced(s, 1);
  std::map<int, std::vector<std::int64_t>> at;
  std::map<int, std::vector<std::string>> kinds;
  for (const auto& j : t.lines) {
    if (j["ev"] == "action") {
      at[j["request"].get<int>()].push_back(j["t_us"].get<std::int64_t>());
      kinds[j["request"].get<int>()].push_back(j["kind"].get<std::string>());
    }
  }
  ASSERT_FALSE(at.empty());
  for (const auto& [r, ts] : at) {
    for (std::size_t i = 1; i < ts.size(); ++i) EXPECT_GE(ts[i] - ts[i - 1], 2'000'000) << r;
    EXPECT_LE(ts.size(), 5u);
    if (ts.size() == 5) EXPECT_EQ(kinds[r].back(), "terminate");
  }
  EXPECT_TRUE(t.rep.ok());
}

TEST(Sim, PurificationRaisesFidelity) {
  auto s = small(PolicyKind::Scoring);
  s.workload.requirement = MaxRateMinFidelity{0.95};
  const auto t = traced(s, 1);
  EXPECT_TRUE(t.rep.ok()) << (t.rep.errors.empty() ? "" : t.rep.errors[0]);
  EXPECT_GT(t.m.purifications, 0);
  if (t.m.delivered > 0) EXPECT_GE(t.m.mean_fidelity, 0.95 - 1e-9);
}

TEST(Sim, ContinuousStockStaysWithinBounds) {
  auto s = small(PolicyKind::Scoring);
  s.sim.params.duration = SimTime::seconds(10);
  s.sim.predist.model = PredistModel::Continuous;
  s.sim.predist.superlinks = 3;
  s.workload.offset = SimTime::seconds(3);
  const auto t = traced(s, 1);
  EXPECT_TRUE(t.rep.ok()) << (t.rep.errors.empty() ? "" : t.rep.errors[0]);
  EXPECT_GT(t.m.predist_generated, 0);
  // generation never switches on while a pair's stock is at or above the threshold
  for (const auto& j : t.lines) {
    if (j["ev"] == "predist" && j["generate"].get<bool>()) {
      EXPECT_LT(j["stock"].get<int>(), s.sim.predist.replenish_threshold);
    }
  }
}
