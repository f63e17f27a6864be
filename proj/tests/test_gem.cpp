#include <gtest/gtest.h>

#include <algorithm>
#include <queue>
#include <vector>

#include "gem_replay.hpp"

using namespace qnetsim;
using namespace gemreplay;

TEST(Gem, FanOut) {
  const auto all = nodes_upto(100);
  GemReplica d(3, GemMode::Distributed);
  auto out = d.record_local_change(rec(1, 3, 4), UpdateKind::Created, SimTime::micros(5), all);
  EXPECT_EQ(out.size(), 99u);
  EXPECT_TRUE(std::none_of(out.begin(), out.end(), [](const GemUpdate& u) { return u.to == 3; }));

  GemReplica c(3, GemMode::CentralizedClient, 50);
  out = c.record_local_change(rec(1, 3, 4), UpdateKind::Created, SimTime::micros(5), all);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].to, 50);

  GemReplica h(50, GemMode::CentralizedHolder, 50);
  EXPECT_TRUE(h.record_local_change(rec(2, 50, 7), UpdateKind::Created, SimTime::micros(5), all).empty());
  EXPECT_EQ(h.size(), 1u);
}

TEST(Gem, OnlyEndpointsOriginate) {
  GemReplica r(9, GemMode::Distributed);
  EXPECT_THROW(r.record_local_change(rec(1, 3, 4), UpdateKind::Created, SimTime::zero(), nodes_upto(10)),
               NotAnEndpoint);
  EXPECT_EQ(r.size(), 0u);
}

TEST(Gem, OwnChangeVersionIncreases) {
  GemReplica r(3, GemMode::Distributed);
  const auto all = nodes_upto(5);
  r.record_local_change(rec(1, 3, 4), UpdateKind::Created, SimTime::micros(10), all);
  const Version v1 = r.records().at(1).version;
  // same instant: the sequence number orders the two changes
  r.record_local_change(rec(1, 3, 4, 1, EpStatus::LockedForSwap), UpdateKind::Locked, SimTime::micros(10), all);
  const Version v2 = r.records().at(1).version;
  EXPECT_LT(v1, v2);
  // a newer remote version is stored; the next own change must still beat it
  GemUpdate u{3, rec(1, 3, 4, 1, EpStatus::Available), UpdateKind::Unlocked};
  u.record.version = Version{SimTime::micros(20), 0, 4};
  EXPECT_TRUE(r.apply_update(u));
  r.record_local_change(rec(1, 3, 4, 1, EpStatus::Consumed), UpdateKind::Consumed, SimTime::micros(20), all);
  EXPECT_LT(u.record.version, r.records().at(1).version);
  EXPECT_EQ(r.records().at(1).status, EpStatus::Consumed);
}

TEST(Gem, LastWriterWins) {
  GemReplica r(0, GemMode::Distributed);
  GemUpdate newer{0, rec(5, 1, 2, 1, EpStatus::Consumed), UpdateKind::Consumed};
  newer.record.version = Version{SimTime::micros(200), 0, 1};
  GemUpdate older{0, rec(5, 1, 2), UpdateKind::Created};
  older.record.version = Version{SimTime::micros(100), 0, 1};
  EXPECT_TRUE(r.apply_update(newer));  // unknown id: inserted
  EXPECT_FALSE(r.apply_update(older));
  EXPECT_EQ(r.records().at(5).status, EpStatus::Consumed);
  EXPECT_FALSE(r.apply_update(newer));  // duplicates are idempotent
}

TEST(Gem, ConcurrentTieGoesToHigherNode) {
  GemUpdate from3{0, rec(8, 3, 7, 1, EpStatus::LockedForSwap), UpdateKind::Locked};
  from3.record.version = Version{SimTime::micros(50), 0, 3};
  GemUpdate from7{0, rec(8, 3, 7, 1, EpStatus::Discarded), UpdateKind::Discarded};
  from7.record.version = Version{SimTime::micros(50), 0, 7};
  GemReplica x(0, GemMode::Distributed), y(1, GemMode::Distributed);
  x.apply_update(from3);
  x.apply_update(from7);
  y.apply_update(from7);
  y.apply_update(from3);
  EXPECT_EQ(x.records().at(8).status, EpStatus::Discarded);
  EXPECT_TRUE(same_maps(x, y));
}

TEST(Gem, QueryFilters) {
  GemReplica r(0, GemMode::Distributed);
  const auto all = nodes_upto(10);
  EXPECT_TRUE(r.query_available({}).empty());
  r.record_local_change(rec(1, 0, 1, 1), UpdateKind::Created, SimTime::micros(1), all);
  r.record_local_change(rec(2, 0, 2, 2), UpdateKind::Created, SimTime::micros(1), all);
  r.record_local_change(rec(3, 0, 3, kPredistributed), UpdateKind::Created, SimTime::micros(1), all);
  r.record_local_change(rec(4, 0, 4, 1, EpStatus::Consumed), UpdateKind::Consumed, SimTime::micros(1), all);
  r.record_local_change(rec(5, 0, 5, 1, EpStatus::LockedForSwap), UpdateKind::Locked, SimTime::micros(1), all);

  GemFilter by_req;
  by_req.request = 1;
  auto got = r.query_available(by_req);
  std::vector<EpId> ids;
  for (const auto& e : got) ids.push_back(e.id);
  EXPECT_EQ(ids, (std::vector<EpId>{1, 3}));  // the predistributed EP matches any request

  GemFilter ends;
  ends.endpoints = std::pair<NodeId, NodeId>{2, 0};
  ASSERT_EQ(r.query_available(ends).size(), 1u);
  EXPECT_EQ(r.query_available(ends)[0].id, 2);

  GemFilter route;
  route.route = {0, 3, 9};
  ASSERT_EQ(r.query_available(route).size(), 1u);
  EXPECT_EQ(r.query_available(route)[0].id, 3);

  GemFilter touch;
  touch.touching = 4;
  EXPECT_TRUE(r.query_available(touch).empty());  // consumed records never show up
}

TEST(Gem, TombstonesCollectedAfterKeep) {
  GemReplica r(0, GemMode::Distributed);
  const auto all = nodes_upto(3);
  r.record_local_change(rec(1, 0, 1), UpdateKind::Created, SimTime::millis(0), all);
  r.record_local_change(rec(1, 0, 1, 1, EpStatus::Consumed), UpdateKind::Consumed, SimTime::millis(100), all);
  r.record_local_change(rec(2, 0, 2), UpdateKind::Created, SimTime::millis(100), all);
  EXPECT_EQ(r.collect_garbage(SimTime::millis(1099)), 0u);
  EXPECT_EQ(r.collect_garbage(SimTime::millis(1100)), 1u);
  EXPECT_EQ(r.size(), 1u);
  EXPECT_EQ(r.records().count(2), 1u);
}


// Replicas exchange every update with random delays and random order among
// equal delivery times; once everything is delivered, all maps agree.
TEST(Gem, ConvergesUnderRandomDelays) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) EXPECT_TRUE(converges(seed, 8, SimTime::seconds(10))) << "seed " << seed;
}

// The shared-history directory must show each node what an explicit replica
// receiving updates after latency(origin, node) would hold.
TEST(Gem, DirectoryMatchesExplicitReplicas) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const int n = 6;
    const auto all = nodes_upto(n);
    auto lat = [](NodeId a, NodeId b) { return SimTime::micros(37 * std::abs(a - b) + 5 * ((a + b) % 3)); };
    GemDirectory dir(lat);
    std::vector<GemReplica> reps;
    for (NodeId i = 0; i < n; ++i) reps.emplace_back(i, GemMode::Distributed);
    std::priority_queue<Delivery, std::vector<Delivery>, std::greater<>> inflight;
    std::uint64_t order = 0;
    const auto changes = random_changes(seed + 100, n, SimTime::millis(400), 5);

    auto check = [&](SimTime t) {
      while (!inflight.empty() && inflight.top().at <= t) {
        const Delivery d = inflight.top();
        inflight.pop();
        reps[d.u.to].apply_update(d.u, d.at);
      }
      for (NodeId x = 0; x < n; ++x) {
        for (const auto& [id, r] : reps[x].records()) {
          const EpRecord* v = dir.view(id, x, t);
          ASSERT_NE(v, nullptr) << "seed " << seed << " node " << x << " ep " << id;
          EXPECT_TRUE(same(*v, r)) << "seed " << seed << " node " << x << " ep " << id;
        }
      }
    };
    for (const auto& c : changes) {
      check(c.t - SimTime::micros(1));
      auto ups = reps[c.origin].record_local_change(c.rec, c.kind, c.t, all);
      const EpRecord stamped = reps[c.origin].records().at(c.rec.id);
      dir.publish(stamped, c.co);
      for (auto& u : ups) {
        const auto at = u.to == c.co ? c.t : c.t + lat(c.origin, u.to);
        inflight.push({at, order++, u});
      }
      check(c.t);
    }
    check(SimTime::seconds(1));
  }
}
