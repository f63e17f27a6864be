#include <gtest/gtest.h>

#include "qnetsim/topology.hpp"
#include "qnetsim/workload.hpp"
#include "test_util.hpp"

using namespace qnetsim;

namespace {

int hop_distance(const NetworkGraph& g, NodeId a, NodeId b) {
  std::vector<int> d(g.node_count(), -1);
  std::vector<NodeId> q{a};
  d[a] = 0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    for (const auto& adj : g.neighbors(q[k])) {
      if (d[adj.neighbor] < 0) {
        d[adj.neighbor] = d[q[k]] + 1;
        q.push_back(adj.neighbor);
      }
    }
  }
  return d[b];
}

}  // namespace

TEST(Workload, ArrivalsAreArithmetic) {
  const auto g = generate_network(SimParams{}, 1);
  WorkloadSpec w;
  const auto reqs = generate_workload(w, g);
  ASSERT_EQ(reqs.size(), 15u);
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    EXPECT_EQ(reqs[i].arrival, SimTime::seconds(5 * static_cast<std::int64_t>(i)));
    EXPECT_EQ(reqs[i].id, static_cast<RequestId>(i + 1));
  }
  EXPECT_EQ(reqs.back().arrival, SimTime::seconds(70));
  w.offset = SimTime::seconds(5);
  EXPECT_EQ(generate_workload(w, g).front().arrival, SimTime::seconds(5));
}

TEST(Workload, SingleRequestAndDeterminism) {
  const auto g = generate_network(SimParams{}, 2);
  WorkloadSpec w;
  w.requests = 1;
  EXPECT_EQ(generate_workload(w, g).size(), 1u);
  w.requests = 15;
  w.seed = 9;
  const auto a = generate_workload(w, g), b = generate_workload(w, g);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].src, b[i].src);
    EXPECT_EQ(a[i].dst, b[i].dst);
  }
  w.seed = 10;
  const auto c = generate_workload(w, g);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].src != c[i].src || a[i].dst != c[i].dst;
  EXPECT_TRUE(differs);
}

TEST(Workload, EndpointsAtLeastTwoHopsApart) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto g = generate_network(SimParams{}, seed);
    WorkloadSpec w;
    w.requests = 200;
    w.seed = seed;
    for (const auto& e : generate_workload(w, g)) {
      EXPECT_NE(e.src, e.dst);
      EXPECT_GE(hop_distance(g, e.src, e.dst), 2);
    }
  }
}

TEST(Workload, NoEligiblePair) {
  const auto g = testutil::chain({0, 10});
  WorkloadSpec w;
  EXPECT_THROW(generate_workload(w, g), std::invalid_argument);
  NetworkGraph one;
  one.add_node({0, 0}, 5);
  EXPECT_THROW(generate_workload(w, one), std::invalid_argument);
}

TEST(Workload, JsonRoundTrip) {
  std::vector<Edr> w(4);
  w[0] = {1, 0, 5, FixedCount{3}, std::nullopt, SimTime::seconds(1)};
  w[1] = {2, 1, 6, RateMaxFidelity{2.5}, 3, SimTime::millis(1500)};
  w[2] = {3, 2, 7, MaxRateMinFidelity{0.8}, std::nullopt, SimTime::zero()};
  w[3] = {4, 3, 8, RateAndFidelity{4.0, 0.9}, std::nullopt, SimTime::seconds(9)};
  const auto back = workload_from_json(workload_to_json(w));
  ASSERT_EQ(back.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(back[i].id, w[i].id);
    EXPECT_EQ(back[i].src, w[i].src);
    EXPECT_EQ(back[i].dst, w[i].dst);
    EXPECT_EQ(back[i].arrival, w[i].arrival);
    EXPECT_EQ(back[i].priority, w[i].priority);
    EXPECT_EQ(requirement_to_json(back[i].requirement), requirement_to_json(w[i].requirement));
  }
  EXPECT_EQ(required_count(w[0].requirement), 3);
  EXPECT_EQ(required_rate(w[1].requirement), 2.5);
  EXPECT_EQ(required_fidelity(w[2].requirement), 0.8);
  EXPECT_FALSE(required_rate(w[2].requirement).has_value());
}

TEST(Lifecycle, Transitions) {
  LifecycleLog log;
  Edr e;
  e.id = 7;
  log.add_request(e);
  EXPECT_EQ(log.status(7), RequestStatus::Pending);
  log.notify(7, RequestStatus::InProgress, 0);
  log.notify(7, RequestStatus::Suspended, 2);
  log.notify(7, RequestStatus::InProgress, 2);
  log.notify(7, RequestStatus::Failed, 2, "terminated by monitor");
  EXPECT_EQ(log.status(7), RequestStatus::Failed);
  ASSERT_EQ(log.entries().size(), 4u);
  EXPECT_EQ(log.entries()[1].status, RequestStatus::Suspended);
  EXPECT_EQ(log.entries()[2].status, RequestStatus::InProgress);
  EXPECT_EQ(log.entries()[3].error, "terminated by monitor");
  EXPECT_THROW(log.notify(8, RequestStatus::Completed, 1), UnknownRequest);
  EXPECT_THROW(log.status(8), UnknownRequest);
}
