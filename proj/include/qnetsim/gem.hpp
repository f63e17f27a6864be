#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetsim/qstate.hpp"
#include "qnetsim/sim_time.hpp"
#include "qnetsim/types.hpp"

namespace qnetsim {

enum class EpStatus { Available, LockedForSwap, LockedForPurify, Consumed, Discarded };

inline const char* to_string(EpStatus s) {
  switch (s) {
    case EpStatus::Available: return "available";
    case EpStatus::LockedForSwap: return "locked_swap";
    case EpStatus::LockedForPurify: return "locked_purify";
    case EpStatus::Consumed: return "consumed";
    case EpStatus::Discarded: return "discarded";
  }
  return "?";
}

inline bool is_terminal(EpStatus s) { return s == EpStatus::Consumed || s == EpStatus::Discarded; }
inline bool is_locked(EpStatus s) { return s == EpStatus::LockedForSwap || s == EpStatus::LockedForPurify; }

inline bool valid_transition(EpStatus from, EpStatus to) {
  if (is_terminal(from)) return false;
  if (from == EpStatus::Available) return to != EpStatus::Available;
  // locked
  return to == EpStatus::Available || is_terminal(to);
}

// Last-writer-wins version. `seq` orders successive changes stamped at the
// same instant; the origin id breaks ties between concurrent writers.
struct Version {
  SimTime t;
  std::uint32_t seq = 0;
  NodeId origin = kNoNode;

  auto operator<=>(const Version&) const = default;
};

struct EpRecord {
  EpId id = 0;
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  RequestId request = kNoRequest;
  SimTime created_at;
  WernerState state;
  EpStatus status = EpStatus::Available;
  int slot_a = -1;
  int slot_b = -1;
  Version version;

  bool has(NodeId n) const { return a == n || b == n; }
  NodeId other(NodeId n) const { return n == a ? b : a; }
  SimTime age(SimTime now) const { return now - created_at; }
};

enum class UpdateKind { Created, Consumed, Purified, Swapped, Discarded, Locked, Unlocked };

inline const char* to_string(UpdateKind k) {
  switch (k) {
    case UpdateKind::Created: return "created";
    case UpdateKind::Consumed: return "consumed";
    case UpdateKind::Purified: return "purified";
    case UpdateKind::Swapped: return "swapped";
    case UpdateKind::Discarded: return "discarded";
    case UpdateKind::Locked: return "locked";
    case UpdateKind::Unlocked: return "unlocked";
  }
  return "?";
}

struct GemUpdate {
  NodeId to = kNoNode;
  EpRecord record;
  UpdateKind kind = UpdateKind::Created;
};

struct NotAnEndpoint : std::logic_error {
  NotAnEndpoint(NodeId n, EpId ep)
      : std::logic_error("node " + std::to_string(n) + " is not an endpoint of EP " + std::to_string(ep)) {}
};

enum class GemMode { Distributed, CentralizedClient, CentralizedHolder };

struct GemFilter {
  std::optional<RequestId> request;          // predistributed records always match
  std::optional<std::pair<NodeId, NodeId>> endpoints;
  std::vector<NodeId> route;                 // both endpoints on the route when non-empty
  std::optional<NodeId> touching;            // record has this endpoint

  bool matches(const EpRecord& r) const {
    if (request && r.request != *request && r.request != kPredistributed) return false;
    if (endpoints) {
      const auto [x, y] = *endpoints;
      if (!((r.a == x && r.b == y) || (r.a == y && r.b == x))) return false;
    }
    if (!route.empty()) {
      auto on = [&](NodeId n) { return std::find(route.begin(), route.end(), n) != route.end(); };
      if (!on(r.a) || !on(r.b)) return false;
    }
    if (touching && !r.has(*touching)) return false;
    return true;
  }
};

// One node's copy of the GEM.
class GemReplica {
 public:
  GemReplica(NodeId owner, GemMode mode, NodeId center = kNoNode) : owner_(owner), mode_(mode), center_(center) {}

  NodeId owner() const { return owner_; }
  GemMode mode() const { return mode_; }

  // Applies a change this node originated and returns the messages it must
  // send. `nodes` lists every node in the network.
  std::vector<GemUpdate> record_local_change(EpRecord rec, UpdateKind kind, SimTime now,
                                             const std::vector<NodeId>& nodes) {
    if (!rec.has(owner_)) throw NotAnEndpoint(owner_, rec.id);
    Version v{now, 0, owner_};
    if (auto it = records_.find(rec.id); it != records_.end() && !(it->second.version < v)) {
      v.seq = it->second.version.seq + 1;
    }
    rec.version = v;
    records_[rec.id] = rec;
    note_terminal(rec, now);
    std::vector<GemUpdate> out;
    switch (mode_) {
      case GemMode::Distributed:
        for (NodeId n : nodes) {
          if (n != owner_) out.push_back({n, rec, kind});
        }
        break;
      case GemMode::CentralizedClient:
        out.push_back({center_, rec, kind});
        break;
      case GemMode::CentralizedHolder:
        break;
    }
    return out;
  }

  // Last-writer-wins merge. Returns true when the update was applied.
  bool apply_update(const GemUpdate& u, SimTime now = SimTime::zero()) {
    auto it = records_.find(u.record.id);
    if (it != records_.end() && !(it->second.version < u.record.version)) return false;
    records_[u.record.id] = u.record;
    note_terminal(u.record, now);
    return true;
  }

  std::vector<EpRecord> query_available(const GemFilter& f) const {
    std::vector<EpRecord> out;
    for (const auto& [id, r] : records_) {
      if (r.status == EpStatus::Available && f.matches(r)) out.push_back(r);
    }
    return out;
  }

  // Drops tombstones older than `keep`.
  std::size_t collect_garbage(SimTime now, SimTime keep = SimTime::seconds(1)) {
    std::size_t n = 0;
    for (auto it = tombstones_.begin(); it != tombstones_.end();) {
      if (now - it->second >= keep) {
        auto rec = records_.find(it->first);
        if (rec != records_.end() && is_terminal(rec->second.status)) {
          records_.erase(rec);
          ++n;
        }
        it = tombstones_.erase(it);
      } else {
        ++it;
      }
    }
    return n;
  }

  const std::map<EpId, EpRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  void note_terminal(const EpRecord& r, SimTime now) {
    if (is_terminal(r.status)) tombstones_.emplace(r.id, now);
  }

  NodeId owner_;
  GemMode mode_;
  NodeId center_;
  std::map<EpId, EpRecord> records_;
  std::map<EpId, SimTime> tombstones_;
};

inline nlohmann::json to_json(const EpRecord& r) {
  return {{"ep", r.id},
          {"a", r.a},
          {"b", r.b},
          {"request", r.request},
          {"created_us", r.created_at.count()},
          {"w", r.state.w},
          {"status", to_string(r.status)},
          {"version_us", r.version.t.count()},
          {"version_seq", r.version.seq},
          {"origin", r.version.origin}};
}

// Shared version history used by the large simulations instead of one map
// per node. Every change is stored once with the instant it was made and its
// origin; what node x "has" at time t is, per record, the newest version whose
// delivery time t_change + latency(origin, x) has passed. That is exactly the
// state an LWW replica reaches with reliable delivery, without materializing
// n copies and n - 1 messages per change.
class GemDirectory {
 public:
  using Latency = std::function<SimTime(NodeId, NodeId)>;

  explicit GemDirectory(Latency latency) : latency_(std::move(latency)) {}

  // `co_origin` also sees the change immediately (both ends of a herald).
  void publish(const EpRecord& rec, NodeId co_origin = kNoNode) {
    auto& h = history_[rec.id];
    if (!h.empty() && !(h.back().rec.version < rec.version)) {
      throw std::logic_error("GemDirectory: versions must increase per record");
    }
    h.push_back({rec, co_origin});
    if (h.size() > kKeep) h.erase(h.begin());
  }

  // The record as node x sees it at `now`, if any version has reached x.
  const EpRecord* view(EpId id, NodeId x, SimTime now) const {
    auto it = history_.find(id);
    if (it == history_.end()) return nullptr;
    const EpRecord* best = nullptr;
    for (const auto& e : it->second) {
      if (visible_at(e, x) <= now && (!best || best->version < e.rec.version)) best = &e.rec;
    }
    return best;
  }

  // Newest version regardless of delivery.
  const EpRecord* latest(EpId id) const {
    auto it = history_.find(id);
    if (it == history_.end() || it->second.empty()) return nullptr;
    return &it->second.back().rec;
  }

  void forget(EpId id) { history_.erase(id); }
  std::size_t size() const { return history_.size(); }

 private:
  struct Entry {
    EpRecord rec;
    NodeId co_origin;
  };

  SimTime visible_at(const Entry& e, NodeId x) const {
    if (x == e.rec.version.origin || x == e.co_origin) return e.rec.version.t;
    return e.rec.version.t + latency_(e.rec.version.origin, x);
  }

  static constexpr std::size_t kKeep = 6;
  Latency latency_;
  std::unordered_map<EpId, std::vector<Entry>> history_;
};

}  // namespace qnetsim
