#pragma once

// Replays random EP change streams through explicit GEM replicas.

#include <map>
#include <queue>
#include <tuple>
#include <vector>

#include "qnetsim/gem.hpp"
#include "qnetsim/rng.hpp"

namespace gemreplay {

using namespace qnetsim;

inline std::vector<NodeId> nodes_upto(int n) {
  std::vector<NodeId> v;
  for (int i = 0; i < n; ++i) v.push_back(i);
  return v;
}

inline EpRecord rec(EpId id, NodeId a, NodeId b, RequestId r = 1, EpStatus s = EpStatus::Available) {
  EpRecord e;
  e.id = id;
  e.a = a;
  e.b = b;
  e.request = r;
  e.status = s;
  return e;
}

inline bool same(const EpRecord& x, const EpRecord& y) {
  return to_json(x) == to_json(y);
}

inline bool same_maps(const GemReplica& x, const GemReplica& y) {
  if (x.size() != y.size()) return false;
  auto i = x.records().begin();
  auto j = y.records().begin();
  for (; i != x.records().end(); ++i, ++j) {
    if (i->first != j->first || !same(i->second, j->second)) return false;
  }
  return true;
}


// A random stream of EP changes over a few nodes. Each change is made by one
// endpoint of the EP at a strictly later instant than the previous change.
struct Change {
  SimTime t;
  NodeId origin;
  NodeId co;  // other endpoint sees it at once (herald), or kNoNode
  EpRecord rec;
  UpdateKind kind;
};

inline std::vector<Change> random_changes(std::uint64_t seed, int n, SimTime horizon, int max_changes_per_ep) {
  RngStream rng(seed, 0, RngPurpose::Test);
  std::vector<Change> out;
  std::map<EpId, std::pair<EpRecord, int>> live;
  EpId next = 1;
  SimTime t = SimTime::zero();
  while (true) {
    t = t + SimTime::micros(1 + static_cast<std::int64_t>(rng.uniform_index(3000)));
    if (t > horizon) break;
    const bool create = live.empty() || rng.uniform01() < 0.35;
    if (create) {
      const NodeId a = static_cast<NodeId>(rng.uniform_index(n));
      NodeId b = static_cast<NodeId>(rng.uniform_index(n - 1));
      if (b >= a) ++b;
      EpRecord e = rec(next++, a, b, rng.uniform01() < 0.2 ? kPredistributed : 1 + static_cast<RequestId>(rng.uniform_index(3)));
      e.created_at = t;
      e.state = WernerState{0.94, t};
      live[e.id] = {e, 1};
      out.push_back({t, a, b, e, UpdateKind::Created});
      continue;
    }
    auto it = live.begin();
    std::advance(it, static_cast<long>(rng.uniform_index(live.size())));
    auto& [e, count] = it->second;
    const NodeId who = rng.uniform01() < 0.5 ? e.a : e.b;
    UpdateKind k;
    if (e.status == EpStatus::Available) {
      const double u = rng.uniform01();
      if (u < 0.4) {
        e.status = EpStatus::LockedForSwap;
        k = UpdateKind::Locked;
      } else if (u < 0.7) {
        e.status = EpStatus::Consumed;
        k = UpdateKind::Consumed;
      } else {
        e.status = EpStatus::Discarded;
        k = UpdateKind::Discarded;
      }
    } else {
      const bool back = rng.uniform01() < 0.5;
      e.status = back ? EpStatus::Available : EpStatus::Consumed;
      k = back ? UpdateKind::Unlocked : UpdateKind::Swapped;
    }
    if (++count >= max_changes_per_ep && !is_terminal(e.status)) {
      e.status = EpStatus::Discarded;
      k = UpdateKind::Discarded;
    }
    out.push_back({t, who, kNoNode, e, k});
    if (is_terminal(e.status)) live.erase(it);
  }
  return out;
}

struct Delivery {
  SimTime at;
  std::uint64_t order;
  GemUpdate u;
  bool operator>(const Delivery& o) const { return std::tie(at, order) > std::tie(o.at, o.order); }
};


// Every replica applies every update after a random coarse delay; returns
// true when all maps agree once nothing is in flight.
inline bool converges(std::uint64_t seed, int n, SimTime horizon) {
  const auto all = nodes_upto(n);
  std::vector<GemReplica> reps;
  for (NodeId i = 0; i < n; ++i) reps.emplace_back(i, GemMode::Distributed);
  RngStream delay(seed, 1, RngPurpose::Test);
  std::priority_queue<Delivery, std::vector<Delivery>, std::greater<>> inflight;
  auto deliver_until = [&](SimTime t) {
    while (!inflight.empty() && inflight.top().at <= t) {
      const Delivery d = inflight.top();
      inflight.pop();
      reps[d.u.to].apply_update(d.u, d.at);
    }
  };
  for (const auto& c : random_changes(seed, n, horizon, 5)) {
    deliver_until(c.t);
    for (auto& u : reps[c.origin].record_local_change(c.rec, c.kind, c.t, all)) {
      // coarse delays so that many deliveries coincide
      const auto at = c.t + SimTime::micros(100 * static_cast<std::int64_t>(delay.uniform_index(40)));
      inflight.push({at, delay.next_u64(), u});
    }
  }
  deliver_until(SimTime::max());
  for (NodeId i = 1; i < n; ++i) {
    if (!same_maps(reps[0], reps[i])) return false;
  }
  return true;
}

}  // namespace gemreplay
