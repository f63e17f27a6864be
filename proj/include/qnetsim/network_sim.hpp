#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetsim/event_engine.hpp"
#include "qnetsim/gem.hpp"
#include "qnetsim/link_layer.hpp"
#include "qnetsim/messages.hpp"
#include "qnetsim/params.hpp"
#include "qnetsim/planner.hpp"
#include "qnetsim/qstate.hpp"
#include "qnetsim/rng.hpp"
#include "qnetsim/swap_policy.hpp"
#include "qnetsim/topology.hpp"
#include "qnetsim/transport.hpp"
#include "qnetsim/workload.hpp"

namespace qnetsim {

enum class GemSync { Distributed, Centralized };

inline const char* to_string(GemSync m) { return m == GemSync::Distributed ? "distributed" : "centralized"; }

inline GemSync gem_sync_from_string(const std::string& s) {
  if (s == "distributed") return GemSync::Distributed;
  if (s == "centralized") return GemSync::Centralized;
  throw std::invalid_argument("unknown gem mode: " + s);
}

struct SimConfig {
  SimParams params;
  PolicyKind policy = PolicyKind::Scoring;
  GemSync gem = GemSync::Distributed;
  ScoringParams scoring;
  double rho = 0.7;
  double l_target_factor = 2.0;  // L_target = factor * planner root estimate
  PredistConfig predist;
  MonitorConfig monitor;  // thresholds are taken from each request
  double monitor_floor = 0.5;  // dual-threshold floor, fraction of the original
  SimTime decision_retry = SimTime::micros(100);
  SimTime monitor_period = SimTime::millis(500);
  SimTime predist_period = SimTime::millis(10);
  SimTime tombstone_keep = SimTime::seconds(1);
  double corridor = 1.4;  // connectionless: d(s,u) + d(u,t) <= corridor * d(s,t)
  std::uint64_t seed = 1;
};

struct RequestMetrics {
  RequestId id = 0;
  NodeId src = kNoNode;
  NodeId dst = kNoNode;
  int hops = 0;
  RequestStatus status = RequestStatus::Pending;
  std::int64_t delivered = 0;
  double latency_sum_s = 0.0;
  double fidelity_sum = 0.0;
  double estimate_s = 0.0;  // planner root latency, 0 when unplanned
  SimTime arrival;

  double mean_latency_s() const { return delivered ? latency_sum_s / static_cast<double>(delivered) : 0.0; }
  double mean_fidelity() const { return delivered ? fidelity_sum / static_cast<double>(delivered) : 0.0; }
};

struct SimMetrics {
  std::vector<RequestMetrics> requests;
  double duration_s = 0.0;
  std::int64_t delivered = 0;
  double rate = 0.0;
  double mean_latency_s = 0.0;
  double mean_fidelity = 0.0;
  std::int64_t link_eps = 0;
  std::int64_t swaps_attempted = 0;
  std::int64_t swaps_succeeded = 0;
  std::int64_t lock_conflicts = 0;
  std::int64_t discard_cutoff = 0;
  std::int64_t discard_swap_fail = 0;
  std::int64_t discard_purify_fail = 0;
  std::int64_t discard_evicted = 0;
  std::int64_t discard_dead_end = 0;
  std::int64_t discard_abandoned = 0;
  std::int64_t purifications = 0;
  std::int64_t predist_generated = 0;
  std::int64_t predist_used = 0;
  std::int64_t gem_messages = 0;
  std::int64_t classical_messages = 0;
  std::int64_t monitor_actions = 0;
  std::uint64_t events = 0;

  std::int64_t discards() const {
    return discard_cutoff + discard_swap_fail + discard_purify_fail + discard_evicted + discard_dead_end +
           discard_abandoned;
  }
};

// Trace verbosity: 0 off, 1 requests and deliveries, 2 every EP and swap.
using TraceSink = std::function<void(const nlohmann::json&)>;

namespace detail {

struct SimEp {
  EpId id = 0;
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  RequestId req = kNoRequest;
  int pair = -1;  // super-link index when predistributed
  SimTime created;
  double w = 1.0;
  SimTime w_at;
  EpStatus status = EpStatus::Available;
  LinkId ca = kNoLink;  // slot charge at a
  LinkId cb = kNoLink;  // slot charge at b
  int depth = 0;
  int hops = 1;
  int purify_done = 0;
  int purify_needed = 0;
  bool pending = false;   // swap product waiting for the ack
  bool buffered = false;  // in the link purification pipeline
  std::uint32_t epoch = 0;
  NodeId locker = kNoNode;  // node that holds the swap lock
  Version ver;

  NodeId other(NodeId n) const { return n == a ? b : a; }
  LinkId charge(NodeId n) const { return n == a ? ca : cb; }
  bool has(NodeId n) const { return n == a || n == b; }
};

struct SimReq {
  Edr edr;
  bool internal = false;
  int pair = -1;
  bool connectionless = false;
  bool active = false;
  bool reserved = false;
  RequestStatus status = RequestStatus::Pending;
  Plan plan;
  std::vector<int> pos;  // route position per node, -1 off the route
  std::vector<int> sw_l, sw_r;
  std::vector<double> lam_l, lam_r;
  std::vector<int> span_depth;  // (h+1)^2
  std::vector<NodeId> decision_nodes;
  std::vector<LinkId> task_links;
  SimTime l_target;
  DiscardPolicy discard;
  double fidelity_threshold = 0.0;
  double rate_scale = 1.0;
  SimTime last_delivery;
  RequestMetrics m;
  bool monitored = false;
  MonitorState mon;
  MonitorConfig mcfg;
  double rate_floor = 0.0;
  double fid_floor = 0.0;
  std::uint32_t suspend_epoch = 0;
  std::vector<EpId> eps;
  // connectionless
  std::vector<char> corridor;
  std::vector<std::vector<NodeId>> forward;  // per node, forward neighbours by distance to dst

  int hops() const { return static_cast<int>(plan.route.size()) - 1; }
  int depth_of(int i, int j) const {
    if (i > j) std::swap(i, j);
    return span_depth[static_cast<std::size_t>(i) * plan.route.size() + static_cast<std::size_t>(j)];
  }
};

struct LinkRt {
  LinkScheduler sched;
  RngStream gen_rng;
  RngStream pur_rng;
  bool armed = false;
  std::uint64_t token = 0;
  bool purify = false;
};

}  // namespace detail

class NetworkSim {
 public:
  NetworkSim(const NetworkGraph& g, std::vector<Edr> workload, SimConfig cfg)
      : g_(g),
        cfg_(std::move(cfg)),
        workload_(std::move(workload)),
        noise_{cfg_.params.depolar_rate, cfg_.params.dephase_rate},
        dir_([this](NodeId a, NodeId b) { return lat(a, b); }) {
    cfg_.params.validate();
    cfg_.predist.validate();
    if (cfg_.predist.model != PredistModel::None) {
      const int cap = g_.node_count() ? g_.node(0).memory_capacity : cfg_.params.memory_slots;
      // A pair's stock must leave one slot free at each end for new EPs.
      predist_eff_ = cfg_.predist;
      predist_eff_.stock_target = std::max(1, std::min(cfg_.predist.stock_target, cap - 1));
      predist_eff_.replenish_threshold =
          std::min(cfg_.predist.replenish_threshold, predist_eff_.stock_target - 1);
    }
  }

  void set_trace(TraceSink sink, int level) {
    trace_ = std::move(sink);
    trace_level_ = trace_ ? level : 0;
  }

  const LifecycleLog& lifecycle() const { return lifecycle_; }
  const std::vector<NodePair>& superlinks() const { return superlinks_; }
  NodeId center() const { return center_; }

  SimMetrics run() {
    setup();
    auto handler = [this](const Event<SimMessage>& ev) {
      std::visit([this](const auto& m) { on(m); }, ev.payload);
      flush_single_instance();
    };
    const auto summary = engine_.run_until(cfg_.params.duration, handler);
    return finish(summary.events_processed);
  }

 private:
  using Ep = detail::SimEp;
  using Req = detail::SimReq;

  // --- helpers -------------------------------------------------------------

  SimTime now() const { return engine_.now(); }

  SimTime lat(NodeId a, NodeId b) const {
    if (a == b) return SimTime::zero();
    return classical_latency(g_, a, b, cfg_.params);
  }

  void send(SimTime delay, NodeId to, SimMessage msg) {
    ++m_.classical_messages;
    engine_.schedule_in(std::max(delay, SimTime::micros(1)), to, std::move(msg));
  }

  void trace(int level, nlohmann::json j) {
    if (level > trace_level_) return;
    j["t_us"] = now().count();
    trace_(j);
  }

  bool adaptive() const { return is_adaptive(cfg_.policy); }
  PolicyKind rank_policy() const {
    return cfg_.policy == PolicyKind::Connectionless ? PolicyKind::SwapAsap : cfg_.policy;
  }

  Req* find_req(RequestId id) {
    auto it = reqs_.find(id);
    return it == reqs_.end() ? nullptr : &it->second;
  }

  double werner_now(const Ep& e) const { return decay(WernerState{e.w, e.w_at}, now() - e.w_at, noise_).w; }

  // --- memory --------------------------------------------------------------

  int used_link(NodeId x, LinkId l) const {
    for (auto [k, c] : link_used_[x]) {
      if (k == l) return c;
    }
    return 0;
  }

  int quota(NodeId x, LinkId l) const {
    const int cap = g_.node(x).memory_capacity;
    // background links only split what request links leave idle
    const int sharing = regular_links_[x] > 0 ? regular_links_[x] : active_links_[x];
    int q = std::max(1, cap / std::max(1, sharing));
    if (links_[l].purify) q = std::max(q, std::min(2, cap));
    return q;
  }

  bool can_store(NodeId x, LinkId l) const {
    return used_[x] < g_.node(x).memory_capacity && used_link(x, l) < quota(x, l);
  }

  void occupy(NodeId x, LinkId l) {
    ++used_[x];
    for (auto& [k, c] : link_used_[x]) {
      if (k == l) {
        ++c;
        trace_slot(x);
        return;
      }
    }
    link_used_[x].emplace_back(l, 1);
    trace_slot(x);
  }

  void release(NodeId x, LinkId l) {
    --used_[x];
    for (auto& [k, c] : link_used_[x]) {
      if (k == l) --c;
    }
    if (used_[x] < 0) throw std::logic_error("slot accounting underflow");
    trace_slot(x);
    for (const auto& adj : g_.neighbors(x)) arm(adj.link);
  }

  void trace_slot(NodeId x) {
    if (trace_level_ >= 2) trace(2, {{"ev", "slots"}, {"node", x}, {"used", used_[x]}, {"cap", g_.node(x).memory_capacity}});
  }

  void refresh_active(NodeId x) {
    int n = 0, r = 0;
    for (const auto& adj : g_.neighbors(x)) {
      n += links_[adj.link].sched.has_active() ? 1 : 0;
      r += links_[adj.link].sched.has_regular() ? 1 : 0;
    }
    active_links_[x] = n;
    const bool freed = regular_links_[x] > 0 && r == 0;
    regular_links_[x] = r;
    if (freed) {
      for (const auto& adj : g_.neighbors(x)) arm(adj.link);
    }
  }

  // low-priority generation only uses memory nobody with a request is waiting for
  bool low_blocked(LinkId l) const {
    const auto& lk = g_.link(l);
    return !links_[l].sched.has_regular() && (regular_links_[lk.a] > 0 || regular_links_[lk.b] > 0);
  }

  void refresh_link(LinkId l) {
    auto& L = links_[l];
    L.purify = std::any_of(L.sched.tasks().begin(), L.sched.tasks().end(),
                           [](const LinkGenTask& t) { return t.purify_rounds > 0; });
    refresh_active(g_.link(l).a);
    refresh_active(g_.link(l).b);
  }

  bool serves_request(const detail::LinkRt& L) const {
    return std::any_of(L.sched.tasks().begin(), L.sched.tasks().end(),
                       [](const LinkGenTask& t) { return t.active && t.request >= 0; });
  }

  // Oldest available predistributed EP at x gives way to request traffic on l;
  // restricted to EPs charged to l when that link's quota is the limit. EPs
  // spanning part of a route l works for are kept, they serve it directly.
  bool evict_predist(NodeId x, LinkId l, bool only_l) {
    Ep* victim = nullptr;
    for (EpId id : node_eps_[x]) {
      Ep& e = eps_.at(id);
      if (e.req != kPredistributed || e.status != EpStatus::Available) continue;
      if (only_l && e.charge(x) != l) continue;
      if (on_served_route(l, e)) continue;
      if (!victim || e.created < victim->created) victim = &e;
    }
    if (!victim) return false;
    ++m_.discard_evicted;
    drop(*victim, "evicted");
    return true;
  }

  bool on_served_route(LinkId l, const Ep& e) const {
    for (const auto& t : links_[l].sched.tasks()) {
      if (!t.active || t.request < 0) continue;
      auto it = reqs_.find(t.request);
      if (it != reqs_.end() && !it->second.connectionless && it->second.pos[e.a] >= 0 && it->second.pos[e.b] >= 0)
        return true;
    }
    return false;
  }

  // --- link generation -----------------------------------------------------

  bool make_room(LinkId l) {
    const auto& L = links_[l];
    const auto& lk = g_.link(l);
    for (NodeId x : {lk.a, lk.b}) {
      while (!can_store(x, l) && serves_request(L)) {
        const bool by_quota = used_link(x, l) >= quota(x, l);
        if (!evict_predist(x, l, by_quota)) break;
      }
    }
    return can_store(lk.a, l) && can_store(lk.b, l);
  }

  void arm(LinkId l) {
    auto& L = links_[l];
    if (L.armed || !L.sched.has_active() || low_blocked(l)) return;
    const auto& lk = g_.link(l);
    if (!make_room(l) || L.armed) return;  // eviction may have re-armed it
    L.armed = true;
    ++L.token;
    const auto k = attempts_until_success(lk, L.gen_rng);
    engine_.schedule(now() + lk.attempt_period * k, lk.a, LinkHerald{l, L.token});
  }

  void on(const LinkHerald& h) {
    auto& L = links_[h.link];
    if (!L.armed || h.token != L.token) return;
    L.armed = false;
    const auto& lk = g_.link(h.link);
    L.armed = true;  // keep release() from re-arming while we evict
    const bool room = make_room(h.link);
    L.armed = false;
    if (!room) return;  // re-armed when memory frees
    if (low_blocked(h.link)) return;
    auto idx = L.sched.pick();
    if (!idx) return;
    const LinkGenTask task = L.sched.task(*idx);
    Req* q = find_req(task.request);
    if (!q) {
      arm(h.link);
      return;
    }
    Ep e;
    e.id = next_ep_++;
    e.a = lk.a;
    e.b = lk.b;
    e.req = task.request;
    e.created = now();
    e.w = cfg_.params.link_werner();
    e.w_at = now();
    e.ca = h.link;
    e.cb = h.link;
    e.hops = 1;
    e.purify_needed = task.purify_rounds;
    if (!q->connectionless) {
      const int pa = q->pos[e.a], pb = q->pos[e.b];
      if (pa >= 0 && pb >= 0) e.depth = q->depth_of(pa, pb);
    }
    occupy(e.a, h.link);
    occupy(e.b, h.link);
    ++m_.link_eps;
    q->eps.push_back(e.id);
    dirty_.push_back(q->edr.id);
    if (task.purify_rounds > 0) {
      e.buffered = true;
      e.status = EpStatus::LockedForPurify;
      Ep& s = eps_.emplace(e.id, e).first->second;
      publish(s, s.a, s.b, UpdateKind::Created);
      trace_ep(s, "created");
      purify_buf_[{h.link, task.request}].push_back(s.id);
      try_purify(h.link, task.request);
    } else {
      Ep& s = eps_.emplace(e.id, e).first->second;
      make_available(s, UpdateKind::Created, s.a, s.b);
    }
    arm(h.link);
  }

  void try_purify(LinkId l, RequestId r) {
    const std::pair<LinkId, RequestId> key{l, r};
    auto& buf = purify_buf_[key];
    if (purify_busy_[key] || buf.size() < 2) return;
    PurifyResult pr{l, r, buf[0], buf[1]};
    buf.erase(buf.begin(), buf.begin() + 2);
    purify_busy_[key] = true;
    ++m_.purifications;
    const auto& lk = g_.link(l);
    // request, accept, measurement result
    m_.classical_messages += 2;
    send(lat(lk.a, lk.b) * 3, lk.b, pr);
  }

  void on(const PurifyResult& pr) {
    const std::pair<LinkId, RequestId> key{pr.link, pr.request};
    purify_busy_[key] = false;
    auto ki = eps_.find(pr.keep);
    auto si = eps_.find(pr.sacrifice);
    Req* q = find_req(pr.request);
    const bool live = q && q->active;
    if (ki == eps_.end() || si == eps_.end() || !live) {
      if (ki != eps_.end()) drop(ki->second, "abandoned"), ++m_.discard_abandoned;
      if (si != eps_.end()) drop(si->second, "abandoned"), ++m_.discard_abandoned;
      return;
    }
    Ep& k = ki->second;
    Ep& s = si->second;
    const auto out = purify(WernerState{werner_now(k), now()}, WernerState{werner_now(s), now()});
    const bool ok = links_[pr.link].pur_rng.bernoulli(out.success_prob);
    if (!ok) {
      m_.discard_purify_fail += 2;
      drop(s, "purify_fail");
      drop(k, "purify_fail");
      try_purify(pr.link, pr.request);
      return;
    }
    retire_with_slots(s, EpStatus::Consumed, "purify_consumed");
    k.w = out.out.w;
    k.w_at = now();
    ++k.purify_done;
    if (k.purify_done >= k.purify_needed) {
      k.buffered = false;
      make_available(k, UpdateKind::Purified, k.a, k.b);
    } else {
      publish(k, k.a, k.b, UpdateKind::Purified);
      purify_buf_[key].insert(purify_buf_[key].begin(), k.id);
    }
    try_purify(pr.link, pr.request);
  }

  // --- GEM -----------------------------------------------------------------

  EpRecord record(const Ep& e) const {
    EpRecord r;
    r.id = e.id;
    r.a = e.a;
    r.b = e.b;
    r.request = e.req;
    r.created_at = e.created;
    r.state = WernerState{e.w, e.w_at};
    r.status = e.status;
    r.version = e.ver;
    return r;
  }

  void publish(Ep& e, NodeId origin, NodeId co_origin, UpdateKind kind) {
    Version v{now(), 0, origin};
    if (!(e.ver < v)) v.seq = e.ver.seq + 1;
    e.ver = v;
    dir_.publish(record(e), co_origin);
    auto fan = [&](NodeId o) -> std::int64_t {
      if (o == kNoNode) return 0;
      if (cfg_.gem == GemSync::Distributed) return static_cast<std::int64_t>(g_.node_count()) - 1;
      return o == center_ ? 0 : 1;
    };
    m_.gem_messages += fan(origin) + fan(co_origin);
    if (trace_level_ >= 3) trace(3, {{"ev", "gem"}, {"kind", to_string(kind)}, {"rec", to_json(record(e))}});
  }

  struct View {
    NodeId as;
    SimTime at;
  };

  View local_view(NodeId m) const { return View{m, now()}; }

  bool seen_available(EpId id, const View& v) const {
    const EpRecord* r = dir_.view(id, v.as, v.at);
    return r && r->status == EpStatus::Available;
  }

  // --- EP state changes ------------------------------------------------------

  void set_status(Ep& e, EpStatus s) {
    if (e.req == kPredistributed && e.pair >= 0) {
      if (e.status == EpStatus::Available && s != EpStatus::Available) --stock_[e.pair];
      if (e.status != EpStatus::Available && s == EpStatus::Available) ++stock_[e.pair];
    }
    e.status = s;
  }

  static void erase_id(std::vector<EpId>& v, EpId id) {
    auto it = std::find(v.begin(), v.end(), id);
    if (it != v.end()) v.erase(it);
  }

  void make_available(Ep& e, UpdateKind kind, NodeId origin, NodeId co) {
    set_status(e, EpStatus::Available);
    node_eps_[e.a].push_back(e.id);
    node_eps_[e.b].push_back(e.id);
    publish(e, origin, co, kind);
    trace_ep(e, "available");
    on_available(e);
  }

  // Final status; removes the EP from every index. Slots are the caller's job.
  void retire(Ep& e, EpStatus s, NodeId origin, NodeId co, const char* why) {
    set_status(e, s);
    publish(e, origin, co, s == EpStatus::Consumed ? UpdateKind::Consumed : UpdateKind::Discarded);
    if (trace_level_ >= 2) {
      trace(2, {{"ev", "ep_end"}, {"ep", e.id}, {"status", to_string(s)}, {"why", why}, {"a", e.a}, {"b", e.b}});
    }
    erase_id(node_eps_[e.a], e.id);
    erase_id(node_eps_[e.b], e.id);
    if (e.req == kPredistributed) {
      if (e.pair >= 0) erase_id(predist_live_[e.pair], e.id);
    } else if (Req* q = find_req(e.req)) {
      erase_id(q->eps, e.id);
      dirty_.push_back(e.req);
    }
    tombstones_.emplace_back(now(), e.id);
    eps_.erase(e.id);
  }

  void retire_with_slots(Ep& e, EpStatus s, const char* why) {
    const NodeId a = e.a, b = e.b;
    const LinkId ca = e.ca, cb = e.cb;
    retire(e, s, a, b, why);
    release(a, ca);
    release(b, cb);
  }

  void drop(Ep& e, const char* why) { retire_with_slots(e, EpStatus::Discarded, why); }

  void trace_ep(const Ep& e, const char* what) {
    if (trace_level_ < 2) return;
    trace(2, {{"ev", std::string("ep_") + what},
              {"ep", e.id},
              {"a", e.a},
              {"b", e.b},
              {"request", e.req},
              {"fidelity", fidelity_from_werner(e.w)}});
  }

  SimTime cutoff_for(const Ep& e) const {
    if (e.req == kPredistributed) return predist_eff_.max_age;
    auto it = reqs_.find(e.req);
    if (it == reqs_.end()) return SimTime::zero();
    const Req& q = it->second;
    if (adaptive() && !q.connectionless) return q.discard.cutoff(e.depth);
    return q.l_target;
  }

  void schedule_discard(Ep& e) {
    ++e.epoch;
    SimTime at = e.created + cutoff_for(e) + SimTime::micros(1);
    if (at < now()) at = now();
    engine_.schedule(at, e.a, DiscardTimer{e.id, e.epoch});
  }

  void on(const DiscardTimer& d) {
    auto it = eps_.find(d.ep);
    if (it == eps_.end()) return;
    Ep& e = it->second;
    if (e.epoch != d.epoch || e.status != EpStatus::Available || e.pending) return;
    ++m_.discard_cutoff;
    drop(e, "cutoff");
  }

  bool predist_usable(const Ep& e) const {
    return fidelity_from_werner(werner_now(e)) >= predist_eff_.min_fidelity &&
           now() - e.created <= predist_eff_.max_age;
  }

  void on_available(Ep& e) {
    if (e.req == kPredistributed) {
      // a stocked pair that is itself a request's endpoint pair
      for (auto& [id, q] : reqs_) {
        if (q.internal || !q.active || q.status == RequestStatus::Suspended) continue;
        if (normalized(q.edr.src, q.edr.dst) == normalized(e.a, e.b) && predist_usable(e)) {
          ++m_.predist_used;
          deliver(q, e);
          return;
        }
      }
      schedule_discard(e);
      trigger(e.a);
      trigger(e.b);
      return;
    }
    Req* q = find_req(e.req);
    if (!q || !q->active) {
      ++m_.discard_abandoned;
      drop(e, "abandoned");
      return;
    }
    if (normalized(e.a, e.b) == normalized(q->edr.src, q->edr.dst)) {
      if (q->internal) {
        stock_ep(*q, e);
      } else {
        deliver(*q, e);
      }
      return;
    }
    schedule_discard(e);
    trigger(e.a);
    trigger(e.b);
  }

  void stock_ep(Req& gen, Ep& e) {
    erase_id(gen.eps, e.id);
    set_status(e, EpStatus::Discarded);  // leave Available accounting
    e.req = kPredistributed;
    e.pair = gen.pair;
    e.depth = 0;
    predist_live_[gen.pair].push_back(e.id);
    set_status(e, EpStatus::Available);
    ++m_.predist_generated;
    publish(e, e.a, e.b, UpdateKind::Created);
    trace_ep(e, "stocked");
    predist_step();
    on_available(e);
  }

  void deliver(Req& q, Ep& e) {
    const double f = fidelity_from_werner(werner_now(e));
    retire_with_slots(e, EpStatus::Consumed, "delivered");
    const SimTime from = std::max(q.m.arrival, q.last_delivery);
    const double latency = (now() - from).to_seconds();
    q.last_delivery = now();
    ++q.m.delivered;
    q.m.latency_sum_s += latency;
    q.m.fidelity_sum += f;
    if (q.monitored) q.mon.log.push_back({now(), f});
    trace(1, {{"ev", "deliver"}, {"request", q.edr.id}, {"latency_s", latency}, {"fidelity", f}});
    if (auto n = required_count(q.edr.requirement); n && q.m.delivered >= *n) complete(q, RequestStatus::Completed, {});
  }

  // --- requests ------------------------------------------------------------

  void setup() {
    const auto n = g_.node_count();
    used_.assign(n, 0);
    link_used_.assign(n, {});
    active_links_.assign(n, 0);
    regular_links_.assign(n, 0);
    node_eps_.assign(n, {});
    node_reqs_.assign(n, {});
    swap_rng_.clear();
    for (std::size_t i = 0; i < n; ++i) swap_rng_.emplace_back(cfg_.seed, i, RngPurpose::Swap);
    links_.clear();
    for (const auto& l : g_.links()) {
      links_.push_back(detail::LinkRt{LinkScheduler{}, RngStream(cfg_.seed, static_cast<std::uint64_t>(l.id), RngPurpose::LinkGeneration),
                                      RngStream(cfg_.seed, static_cast<std::uint64_t>(l.id), RngPurpose::Purification)});
    }
    ledger_ = ResourceLedger(g_);
    center_ = g_.center_node(cfg_.params.side_km);
    query_out_.assign(n, 0);
    query_again_.assign(n, 0);
    retry_pending_.assign(n, 0);

    first_arrival_ = cfg_.params.duration;
    for (const auto& e : workload_) first_arrival_ = std::min(first_arrival_, e.arrival);

    if (cfg_.predist.model != PredistModel::None) setup_predist();
    for (const auto& e : workload_) {
      if (e.arrival <= cfg_.params.duration) engine_.schedule(e.arrival, e.src, RequestGeneration{e.id});
    }
    engine_.schedule(SimTime::millis(250), kEngineInternal, Housekeeping{});
  }

  void setup_predist() {
    superlinks_ = cfg_.predist.pairs;
    if (superlinks_.empty() && cfg_.predist.superlinks > 0) {
      std::vector<NodePair> pairs;
      for (const auto& e : workload_) pairs.push_back(normalized(e.src, e.dst));
      superlinks_ = select_superlinks(g_, pairs, cfg_.predist.superlinks, cfg_.params);
    }
    stock_.assign(superlinks_.size(), 0);
    predist_live_.assign(superlinks_.size(), {});
    predist_state_.assign(superlinks_.size(), {});
    predist_on_.assign(superlinks_.size(), 0);
    for (std::size_t k = 0; k < superlinks_.size(); ++k) {
      const auto [a, b] = superlinks_[k];
      Edr e;
      e.id = -100 - static_cast<RequestId>(k);
      e.src = a;
      e.dst = b;
      e.requirement = MaxRateMinFidelity{predist_eff_.min_fidelity};
      Req& q = reqs_.emplace(e.id, Req{}).first->second;
      q.edr = e;
      q.internal = true;
      q.pair = static_cast<int>(k);
      q.m.id = e.id;
      q.m.src = a;
      q.m.dst = b;
      Plan plan = optimal_tree(g_, a, b, cfg_.params, nullptr, e.id);
      install_plan(q, std::move(plan));
      activate(q, false, cfg_.predist.model == PredistModel::Continuous);
    }
    engine_.schedule(SimTime::zero(), kEngineInternal, PredistTick{});
  }

  void predist_step() {
    if (predist_state_.empty()) return;
    for (std::size_t k = 0; k < stock_.size(); ++k) predist_state_[k].stock = stock_[k];
    auto dirs = predist_controller_step(predist_eff_, predist_state_, now() < first_arrival_);
    for (const auto& d : dirs) {
      Req& q = reqs_.at(-100 - static_cast<RequestId>(d.pair_index));
      set_tasks_active(q, d.generate);
      predist_on_[d.pair_index] = d.generate;
      dirty_.push_back(q.edr.id);
      trace(1, {{"ev", "predist"}, {"pair", d.pair_index}, {"generate", d.generate}, {"stock", stock_[d.pair_index]}});
    }
  }

  void on(const PredistTick&) {
    predist_step();
    engine_.schedule_in(cfg_.predist_period, kEngineInternal, PredistTick{});
  }

  void on(const RequestGeneration& rg) {
    const Edr* e = nullptr;
    for (const auto& w : workload_) {
      if (w.id == rg.request) e = &w;
    }
    if (!e) return;
    Req& q = reqs_.emplace(e->id, Req{}).first->second;
    q.edr = *e;
    q.m.id = e->id;
    q.m.src = e->src;
    q.m.dst = e->dst;
    q.m.arrival = now();
    q.last_delivery = now();
    if (auto f = required_fidelity(e->requirement)) q.fidelity_threshold = *f;
    lifecycle_.add_request(*e);
    trace(1, {{"ev", "request"}, {"request", e->id}, {"src", e->src}, {"dst", e->dst}});
    if (cfg_.policy == PolicyKind::Connectionless) {
      start_connectionless(q);
    } else {
      try_start(q);
    }
  }

  bool try_start(Req& q) {
    try {
      Plan plan = optimal_tree(g_, q.edr.src, q.edr.dst, cfg_.params, &ledger_, q.edr.id);
      std::vector<NodePair> zero;
      // only spans with stock on hand are planned as free
      for (std::size_t k = 0; k < superlinks_.size(); ++k) {
        const auto& s = superlinks_[k];
        if (stock_[k] > 0 && plan.position(s.first) >= 0 && plan.position(s.second) >= 0) zero.push_back(s);
      }
      if (!zero.empty()) {
        auto [tree, l] = route_optimal_tree(g_, plan.route, cfg_.params, zero);
        (void)l;
        plan = make_plan(q.edr.id, std::move(tree), g_, cfg_.params, zero);
      }
      if (q.fidelity_threshold > 0.25) plan = augment_with_purification(plan, q.fidelity_threshold, g_, cfg_.params);
      ledger_.reserve(plan);
      q.reserved = true;
      install_plan(q, std::move(plan));
      activate(q, true, false);
      if (auto r = required_rate(q.edr.requirement)) start_monitor(q, *r);
      lifecycle_.notify(q.edr.id, RequestStatus::InProgress, 0, {}, now());
      q.status = RequestStatus::InProgress;
      // stocked spans on the route can be swapped right away
      if (!superlinks_.empty()) {
        for (std::size_t k = 1; k + 1 < q.plan.route.size(); ++k) schedule_retry(q.plan.route[k]);
      }
      // a stocked pair may already serve it
      for (std::size_t k = 0; k < superlinks_.size(); ++k) {
        if (superlinks_[k] != normalized(q.edr.src, q.edr.dst)) continue;
        for (EpId id : std::vector<EpId>(predist_live_[k])) {
          if (!q.active) break;
          auto it = eps_.find(id);
          if (it != eps_.end() && it->second.status == EpStatus::Available && predist_usable(it->second)) {
            ++m_.predist_used;
            deliver(q, it->second);
            if (auto n = required_count(q.edr.requirement); n && q.m.delivered >= *n) break;
          }
        }
      }
      return true;
    } catch (const NoFeasiblePath&) {
      if (std::find(waiting_.begin(), waiting_.end(), q.edr.id) == waiting_.end()) waiting_.push_back(q.edr.id);
      return false;
    } catch (const InfeasibleFidelity& e) {
      complete(q, RequestStatus::Failed, e.what());
      return false;
    }
  }

  void retry_waiting() {
    auto w = waiting_;
    waiting_.clear();
    for (RequestId id : w) {
      Req* q = find_req(id);
      if (q && q->status == RequestStatus::Pending) try_start(*q);
    }
  }

  void install_plan(Req& q, Plan plan) {
    q.plan = std::move(plan);
    const auto& route = q.plan.route;
    const int h = q.hops();
    q.pos.assign(g_.node_count(), -1);
    for (int i = 0; i <= h; ++i) q.pos[route[i]] = i;
    q.sw_l.assign(route.size(), -1);
    q.sw_r.assign(route.size(), -1);
    q.lam_l.assign(route.size(), 0.0);
    q.lam_r.assign(route.size(), 0.0);
    const auto sz = route.size();
    q.span_depth.assign(sz * sz, 0);
    std::vector<int> best(sz * sz, std::numeric_limits<int>::max());
    const auto& tree = q.plan.tree;
    const auto& est = q.plan.estimate;
    auto rate_of = [&](int child) {
      const double l = est.latency_s[child];
      return l > 0 ? 1.0 / l : 0.0;
    };
    for (std::size_t t = 0; t < tree.size(); ++t) {
      const auto& n = tree.node(static_cast<int>(t));
      if (n.kind == TreeKind::Purify) continue;
      int l = q.pos[n.left], r = q.pos[n.right];
      if (l > r) std::swap(l, r);
      if (n.kind == TreeKind::Swap) {
        const int k = q.pos[n.at];
        q.sw_l[k] = l;
        q.sw_r[k] = r;
        const bool left_first = q.pos[tree.node(n.child_l).left] == l || q.pos[tree.node(n.child_l).right] == l;
        q.lam_l[k] = rate_of(left_first ? n.child_l : n.child_r);
        q.lam_r[k] = rate_of(left_first ? n.child_r : n.child_l);
      }
      // smallest plan span containing [i, j]
      for (int i = l; i <= r; ++i) {
        for (int j = i + 1; j <= r; ++j) {
          const auto idx = static_cast<std::size_t>(i) * sz + static_cast<std::size_t>(j);
          if (r - l < best[idx]) {
            best[idx] = r - l;
            q.span_depth[idx] = n.depth;
          }
        }
      }
    }
    // cutoffs come from the plain estimate; super-link spans would make it 0
    const double plain = estimate_latency(q.plan.tree, g_, cfg_.params).root_latency_s;
    q.l_target = SimTime::from_seconds(std::max(cfg_.l_target_factor * plain, 1e-6));
    q.discard = DiscardPolicy{q.l_target, cfg_.rho, adaptive()};
    q.m.hops = h;
    q.m.estimate_s = q.plan.root_latency_s();
    q.decision_nodes.assign(route.begin() + 1, route.end() - 1);
    q.task_links = q.plan.links;
  }

  void activate(Req& q, bool on, bool low_priority) {
    const auto& tree = q.plan.tree;
    for (int li : tree.leaves()) {
      const auto& leaf = tree.node(li);
      int rounds = 0;
      if (leaf.parent >= 0 && tree.node(leaf.parent).kind == TreeKind::Purify) rounds = tree.node(leaf.parent).rounds;
      const double rate = g_.link(leaf.link).expected_rate * q.rate_scale;
      links_[leaf.link].sched.add(LinkGenTask{leaf.link, q.edr.id, rate, rounds, on, low_priority});
    }
    for (NodeId x : q.decision_nodes) node_reqs_[x].push_back(q.edr.id);
    q.active = true;
    dirty_.push_back(q.edr.id);
    for (LinkId l : q.task_links) refresh_link(l);
    for (LinkId l : q.task_links) arm(l);
  }

  void set_tasks_active(Req& q, bool on) {
    for (LinkId l : q.task_links) links_[l].sched.set_active(q.edr.id, on);
    for (LinkId l : q.task_links) refresh_link(l);
    for (LinkId l : q.task_links) arm(l);
  }

  void deactivate(Req& q) {
    if (!q.active) return;
    q.active = false;
    for (LinkId l : q.task_links) {
      links_[l].sched.remove(q.edr.id);
      auto key = std::make_pair(l, q.edr.id);
      if (auto it = purify_buf_.find(key); it != purify_buf_.end()) {
        auto ids = it->second;
        it->second.clear();
        for (EpId id : ids) {
          if (auto e = eps_.find(id); e != eps_.end()) ++m_.discard_abandoned, drop(e->second, "abandoned");
        }
      }
    }
    for (NodeId x : q.decision_nodes) erase_req(node_reqs_[x], q.edr.id);
    for (LinkId l : q.task_links) refresh_link(l);
    for (EpId id : std::vector<EpId>(q.eps)) {
      auto it = eps_.find(id);
      if (it == eps_.end()) continue;
      Ep& e = it->second;
      if (e.status == EpStatus::Available && !e.pending) {
        ++m_.discard_abandoned;
        drop(e, "abandoned");
      }
    }
    if (q.reserved) {
      ledger_.release(q.plan);
      q.reserved = false;
    }
    for (LinkId l : q.task_links) arm(l);
  }

  static void erase_req(std::vector<RequestId>& v, RequestId id) {
    auto it = std::find(v.begin(), v.end(), id);
    if (it != v.end()) v.erase(it);
  }

  void complete(Req& q, RequestStatus s, std::string error) {
    deactivate(q);
    q.status = s;
    lifecycle_.notify(q.edr.id, s, static_cast<int>(q.m.delivered), std::move(error), now());
    trace(1, {{"ev", "request_end"}, {"request", q.edr.id}, {"status", to_string(s)}});
    retry_waiting();
  }

  // FixedTree runs one tree instance per request: a leaf link generates only
  // while no live EP of the request spans it.
  void single_instance(Req& q) {
    if (cfg_.policy != PolicyKind::FixedTree || q.connectionless || !q.active) return;
    if (q.status == RequestStatus::Suspended) return;
    if (q.internal && !predist_on_.empty() && !predist_on_[q.pair]) return;
    const int h = q.hops();
    std::vector<char> covered(static_cast<std::size_t>(h), 0);
    for (EpId id : q.eps) {
      const Ep& e = eps_.at(id);
      if (e.buffered) continue;
      int l = q.pos[e.a], r = q.pos[e.b];
      if (l > r) std::swap(l, r);
      for (int k = l; k < r; ++k) covered[k] = 1;
    }
    for (int k = 0; k < h; ++k) {
      const LinkId l = q.plan.links[k];
      auto& S = links_[l].sched;
      bool was = false;
      for (const auto& t : S.tasks()) {
        if (t.request == q.edr.id) was = t.active;
      }
      if (was == !covered[k]) continue;
      S.set_active(q.edr.id, !covered[k]);
      refresh_link(l);
      arm(l);
    }
  }

  void flush_single_instance() {
    if (dirty_.empty()) return;
    std::vector<RequestId> d;
    d.swap(dirty_);
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    for (RequestId id : d) {
      if (Req* q = find_req(id)) single_instance(*q);
    }
  }

  // --- connectionless ----------------------------------------------------------

  void start_connectionless(Req& q) {
    const NodeId s = q.edr.src, t = q.edr.dst;
    const auto n = g_.node_count();
    // reference plan only for cutoffs and the latency estimate
    Plan ref;
    try {
      ref = optimal_tree(g_, s, t, cfg_.params, nullptr, q.edr.id);
    } catch (const NoFeasiblePath& e) {
      complete(q, RequestStatus::Failed, e.what());
      return;
    }
    q.connectionless = true;
    q.l_target = SimTime::from_seconds(cfg_.l_target_factor * ref.root_latency_s());
    q.discard = DiscardPolicy{q.l_target, cfg_.rho, false};
    q.m.estimate_s = ref.root_latency_s();
    q.m.hops = ref.hops();
    const double st = g_.distance(s, t);
    q.corridor.assign(n, 0);
    q.forward.assign(n, {});
    for (NodeId u = 0; u < static_cast<NodeId>(n); ++u) {
      q.corridor[u] = g_.distance(s, u) + g_.distance(u, t) <= cfg_.corridor * st + 1e-9;
    }
    std::vector<LinkId> links;
    for (NodeId u = 0; u < static_cast<NodeId>(n); ++u) {
      if (!q.corridor[u] || u == t) continue;
      for (const auto& adj : g_.neighbors(u)) {
        const NodeId v = adj.neighbor;
        if (!q.corridor[v] || v == s) continue;
        if (g_.distance(v, t) < g_.distance(u, t)) {
          q.forward[u].push_back(v);
          links.push_back(adj.link);
        }
      }
      std::sort(q.forward[u].begin(), q.forward[u].end(), [&](NodeId a, NodeId b) {
        const double da = g_.distance(a, t), db = g_.distance(b, t);
        return da != db ? da < db : a < b;
      });
    }
    std::sort(links.begin(), links.end());
    links.erase(std::unique(links.begin(), links.end()), links.end());
    q.task_links = links;
    for (LinkId l : links) {
      links_[l].sched.add(LinkGenTask{l, q.edr.id, g_.link(l).expected_rate, 0, true, false});
    }
    for (NodeId u = 0; u < static_cast<NodeId>(n); ++u) {
      if (q.corridor[u] && u != s && u != t) {
        q.decision_nodes.push_back(u);
        node_reqs_[u].push_back(q.edr.id);
      }
    }
    q.active = true;
    q.status = RequestStatus::InProgress;
    lifecycle_.notify(q.edr.id, RequestStatus::InProgress, 0, {}, now());
    for (LinkId l : links) refresh_link(l);
    for (LinkId l : links) arm(l);
  }

  // Extends every EP rooted at src that sits at m by one hop, greedily.
  void connectionless_step(NodeId m, Req& q, const View& v) {
    const NodeId s = q.edr.src;
    std::vector<EpId> rooted;
    for (EpId id : node_eps_[m]) {
      const Ep& e = eps_.at(id);
      if (e.locker != m && e.req == q.edr.id && e.other(m) == s && seen_available(id, v)) rooted.push_back(id);
    }
    for (EpId id : rooted) {
      auto it = eps_.find(id);
      if (it == eps_.end()) continue;
      if (q.forward[m].empty()) {
        ++m_.discard_dead_end;
        if (it->second.status == EpStatus::Available) drop(it->second, "dead_end");
        continue;
      }
      std::optional<EpId> next;
      for (NodeId y : q.forward[m]) {
        for (EpId lid : node_eps_[m]) {
          const Ep& l = eps_.at(lid);
          if (l.locker != m && l.req == q.edr.id && l.hops == 1 && l.other(m) == y && seen_available(lid, v)) {
            next = lid;
            break;
          }
        }
        if (next) break;
      }
      if (!next) continue;
      SwapCandidate c;
      c.m = m;
      c.left = id;
      c.right = *next;
      c.request = q.edr.id;
      if (!start_swap(c)) schedule_retry(m);
    }
  }

  // --- swapping ------------------------------------------------------------

  void trigger(NodeId x) {
    if (node_reqs_[x].empty()) return;
    if (cfg_.gem == GemSync::Distributed || x == center_) {
      decide(x, local_view(x));
      return;
    }
    if (query_out_[x]) {
      query_again_[x] = 1;
      return;
    }
    query_out_[x] = 1;
    m_.classical_messages += 2;  // query and response
    const SimTime one_way = std::max(lat(x, center_), SimTime::micros(1));
    engine_.schedule(now() + one_way * 2, x, GemResponse{x, now() + one_way});
  }

  void on(const GemResponse& r) {
    const NodeId x = r.client;
    query_out_[x] = 0;
    decide(x, View{center_, r.snapshot_at});
    // poll again while the center is behind on this node's EPs
    bool behind = query_again_[x] != 0;
    for (EpId id : node_eps_[x]) {
      const Ep& e = eps_.at(id);
      if (e.status == EpStatus::Available && !seen_available(id, View{center_, r.snapshot_at})) behind = true;
    }
    query_again_[x] = 0;
    if (behind) trigger(x);
  }

  void schedule_retry(NodeId m) {
    if (retry_pending_[m]) return;
    retry_pending_[m] = 1;
    engine_.schedule_in(cfg_.decision_retry, m, DecisionRetry{m});
  }

  void on(const DecisionRetry& r) {
    retry_pending_[r.node] = 0;
    trigger(r.node);
  }

  void decide(NodeId m, const View& v) {
    std::vector<SwapCandidate> cands;
    std::vector<double> scores;
    for (int round = 0; round < 8; ++round) {
      cands.clear();
      scores.clear();
      bool any = false;
      for (RequestId rid : std::vector<RequestId>(node_reqs_[m])) {
        Req* q = find_req(rid);
        if (!q || !q->active || q->status == RequestStatus::Suspended) continue;
        if (q->connectionless) {
          connectionless_step(m, *q, v);
          continue;
        }
        any |= collect(m, *q, v, cands, scores);
      }
      if (cands.empty()) {
        if (any) schedule_retry(m);
        return;
      }
      const auto pick = choose_swap(rank_policy(), cands, scores);
      if (!pick) {
        schedule_retry(m);
        return;
      }
      if (!start_swap(cands[*pick])) {
        schedule_retry(m);
        return;
      }
    }
  }

  // Appends the candidates at m for q. Returns true if some candidate was
  // held back only by its score, so the caller schedules a retry.
  bool collect(NodeId m, Req& q, const View& v, std::vector<SwapCandidate>& cands, std::vector<double>& scores) {
    const int k = q.pos[m];
    const int h = q.hops();
    if (k <= 0 || k >= h) return false;
    const bool fixed = cfg_.policy == PolicyKind::FixedTree;
    std::vector<EpId> left, right;
    for (EpId id : node_eps_[m]) {
      const Ep& e = eps_.at(id);
      if (e.locker == m) continue;  // m knows its own locks
      if (e.req != q.edr.id && !(e.req == kPredistributed && predist_usable(e))) continue;
      const int po = q.pos[e.other(m)];
      if (po < 0) continue;
      if (fixed && po != (po < k ? q.sw_l[k] : q.sw_r[k])) continue;
      if (!seen_available(id, v)) continue;
      (po < k ? left : right).push_back(id);
    }
    if (left.empty() || right.empty()) return false;

    const bool scoring = cfg_.policy == PolicyKind::Scoring;
    ScoreContext ctx;
    if (scoring) {
      ctx.routes.push_back(&q.plan.route);
      auto add = [&](EpId id) {
        auto it = eps_.find(id);
        if (it == eps_.end() || it->second.pending || !seen_available(id, v)) return;
        ctx.available.push_back(normalized(it->second.a, it->second.b));
      };
      for (EpId id : q.eps) add(id);
      for (std::size_t s = 0; s < superlinks_.size(); ++s) {
        if (q.pos[superlinks_[s].first] < 0 || q.pos[superlinks_[s].second] < 0) continue;
        for (EpId id : predist_live_[s]) add(id);
      }
      for (int side = 0; side < 2; ++side) {
        const int pb = side == 0 ? q.sw_l[k] : q.sw_r[k];
        if (pb < 0) continue;
        const NodeId b = q.plan.route[pb];
        const auto& pool = side == 0 ? left : right;
        const bool has = std::any_of(pool.begin(), pool.end(), [&](EpId id) { return eps_.at(id).other(m) == b; });
        if (!has) ctx.partners.push_back({b, side == 0 ? q.lam_l[k] : q.lam_r[k]});
      }
      ctx.mem_load = static_cast<double>(used_[m]) / g_.node(m).memory_capacity;
      ctx.cutoff_age = cfg_.scoring.cutoff_age.value_or(q.l_target);
    }
    bool held = false;
    for (EpId l : left) {
      const Ep& el = eps_.at(l);
      for (EpId r : right) {
        const Ep& er = eps_.at(r);
        SwapCandidate c;
        c.m = m;
        c.left = l;
        c.right = r;
        c.i = el.other(m);
        c.j = er.other(m);
        c.age_left = el.req == kPredistributed ? SimTime::zero() : now() - el.created;
        c.age_right = er.req == kPredistributed ? SimTime::zero() : now() - er.created;
        c.request = q.edr.id;
        c.hop_span = q.pos[c.j] - q.pos[c.i];
        c.depth = q.depth_of(q.pos[c.i], q.pos[c.j]);
        if (scoring) {
          if (c.age_new() >= ctx.cutoff_age) continue;
          int wl = 0;
          for (EpId id : node_eps_[m]) {
            const Ep& e = eps_.at(id);
            if (e.status == EpStatus::Available && (e.has(c.i) || e.has(c.j))) ++wl;
          }
          ctx.waiting_load = wl;
          const double s = score(c, ctx, cfg_.scoring);
          if (!(s > 0)) {
            held = true;
            continue;
          }
          scores.push_back(s);
        }
        cands.push_back(c);
      }
    }
    return held;
  }

  bool start_swap(const SwapCandidate& c) {
    auto a = eps_.find(c.left);
    auto b = eps_.find(c.right);
    auto lockable = [&](auto it) {
      return it != eps_.end() && it->second.status == EpStatus::Available && !it->second.pending;
    };
    if (!lockable(a) || !lockable(b)) {
      ++m_.lock_conflicts;
      return false;
    }
    for (auto* e : {&a->second, &b->second}) {
      set_status(*e, EpStatus::LockedForSwap);
      e->locker = c.m;
      publish(*e, c.m, kNoNode, UpdateKind::Locked);
    }
    ++m_.swaps_attempted;
    engine_.schedule(now() + cfg_.params.swap_latency, c.m, SwapPerform{c.m, c.request, c.left, c.right});
    return true;
  }

  void on(const SwapPerform& sp) {
    const NodeId m = sp.node;
    Ep e1 = eps_.at(sp.left);
    Ep e2 = eps_.at(sp.right);
    const NodeId i = e1.other(m), j = e2.other(m);
    const bool ok = swap_rng_[m].bernoulli(cfg_.params.swap_prob);
    const double w1 = werner_now(e1), w2 = werner_now(e2);
    const LinkId ci = e1.charge(i), cj = e2.charge(j);
    retire(eps_.at(sp.left), ok ? EpStatus::Consumed : EpStatus::Discarded, m, kNoNode, ok ? "swapped" : "swap_fail");
    retire(eps_.at(sp.right), ok ? EpStatus::Consumed : EpStatus::Discarded, m, kNoNode, ok ? "swapped" : "swap_fail");
    if (trace_level_ >= 2) {
      trace(2, {{"ev", "swap"}, {"node", m}, {"request", sp.request}, {"left", sp.left}, {"right", sp.right},
                {"i", i}, {"j", j}, {"ok", ok}});
    }
    if (ok) {
      ++m_.swaps_succeeded;
      m_.predist_used += (e1.req == kPredistributed) + (e2.req == kPredistributed);
      Ep n;
      n.id = next_ep_++;
      n.a = i;
      n.b = j;
      n.req = sp.request;
      auto born = [&](const Ep& e) { return e.req == kPredistributed ? now() : e.created; };
      n.created = std::min(born(e1), born(e2));
      n.w = w1 * w2;
      n.w_at = now();
      n.ca = ci;
      n.cb = cj;
      n.hops = e1.hops + e2.hops;
      n.pending = true;
      n.status = EpStatus::LockedForSwap;
      if (Req* q = find_req(sp.request); q && !q->connectionless && q->pos.size() && q->pos[i] >= 0 && q->pos[j] >= 0) {
        n.depth = q->depth_of(q->pos[i], q->pos[j]);
      }
      eps_.emplace(n.id, n);
      if (Req* q = find_req(n.req)) q->eps.push_back(n.id);
      send(lat(m, j), j, SwapCorrection{n.id, i});
    } else {
      m_.discard_swap_fail += 2;
      send(lat(m, i), i, SwapFail{i, ci});
      send(lat(m, j), j, SwapFail{j, cj});
    }
    release(m, e1.charge(m));
    release(m, e2.charge(m));
    trigger(m);
  }

  void on(const SwapCorrection& sc) {
    auto it = eps_.find(sc.produced);
    if (it == eps_.end()) return;
    const Ep& n = it->second;
    const NodeId j = n.other(sc.left_partner);
    send(lat(j, sc.left_partner), sc.left_partner, SwapAck{sc.produced});
  }

  void on(const SwapAck& ack) {
    auto it = eps_.find(ack.produced);
    if (it == eps_.end()) return;
    Ep& n = it->second;
    n.pending = false;
    make_available(n, UpdateKind::Swapped, n.a, n.b);
  }

  void on(const SwapFail& f) { release(f.node, f.charge); }

  // --- transport ------------------------------------------------------------

  void start_monitor(Req& q, double rate) {
    q.monitored = true;
    q.mcfg = cfg_.monitor;
    q.mcfg.rate_threshold = rate;
    q.mcfg.fidelity_threshold = std::max(0.25, q.fidelity_threshold > 0 ? q.fidelity_threshold : 0.5);
    q.rate_floor = cfg_.monitor_floor * q.mcfg.rate_threshold;
    q.fid_floor = std::max(0.25, cfg_.monitor_floor * q.mcfg.fidelity_threshold);
    engine_.schedule_in(cfg_.monitor_period, q.edr.src, MonitorTick{q.edr.id});
  }

  void on(const MonitorTick& t) {
    Req* q = find_req(t.request);
    if (!q || !q->monitored) return;
    if (q->status == RequestStatus::Completed || q->status == RequestStatus::Failed) return;
    engine_.schedule_in(cfg_.monitor_period, q->edr.src, MonitorTick{t.request});
    if (q->status == RequestStatus::Suspended) return;
    const auto ev = monitor_step(q->mon, q->mcfg, now());
    if (!ev.evaluated) return;
    trace(1, {{"ev", "monitor"}, {"request", t.request}, {"rate", ev.rate}, {"fidelity", ev.fidelity}, {"c", q->mon.c}});
    if (auto nt = dual_threshold_adjust(ev.rate, q->mcfg.rate_threshold, q->rate_floor)) q->mcfg.rate_threshold = *nt;
    if (auto nf = dual_threshold_adjust(ev.fidelity, q->mcfg.fidelity_threshold, q->fid_floor)) {
      q->mcfg.fidelity_threshold = *nf;
    }
    if (ev.action) apply_action(*q, *ev.action);
  }

  void apply_action(Req& q, const CorrectiveAction& a) {
    ++m_.monitor_actions;
    trace(1, {{"ev", "action"}, {"request", q.edr.id}, {"kind", to_string(a.kind)}, {"fraction", a.fraction}});
    switch (a.kind) {
      case ActionKind::Continue:
        break;
      case ActionKind::AdjustRate:
        q.rate_scale *= 1.0 + a.fraction;
        redispatch(q);
        break;
      case ActionKind::AdjustFidelity:
        q.fidelity_threshold = std::clamp(std::max(q.fidelity_threshold, 0.5) * (1.0 + a.fraction), 0.26, 1.0);
        replan(q);
        break;
      case ActionKind::Suspend:
        set_tasks_active(q, false);
        q.status = RequestStatus::Suspended;
        lifecycle_.notify(q.edr.id, RequestStatus::Suspended, static_cast<int>(q.m.delivered), {}, now());
        engine_.schedule_in(a.duration, q.edr.src, SuspendEnd{q.edr.id, ++q.suspend_epoch});
        break;
      case ActionKind::Replan:
        replan(q);
        break;
      case ActionKind::Terminate:
        complete(q, RequestStatus::Failed, "terminated by the execution monitor");
        break;
    }
  }

  void redispatch(Req& q) {
    for (LinkId l : q.task_links) {
      links_[l].sched.remove(q.edr.id);
    }
    for (NodeId x : q.decision_nodes) erase_req(node_reqs_[x], q.edr.id);
    activate(q, q.status != RequestStatus::Suspended, false);
  }

  void replan(Req& q) {
    const bool monitored = q.monitored;
    deactivate(q);
    q.status = RequestStatus::Pending;
    q.decision_nodes.clear();
    q.task_links.clear();
    if (!try_start(q)) {
      lifecycle_.notify(q.edr.id, RequestStatus::Pending, static_cast<int>(q.m.delivered), {}, now());
    } else if (monitored) {
      q.monitored = true;  // try_start scheduled a fresh tick chain; keep one
    }
  }

  void on(const SuspendEnd& s) {
    Req* q = find_req(s.request);
    if (!q || q->status != RequestStatus::Suspended || s.epoch != q->suspend_epoch) return;
    q->status = RequestStatus::InProgress;
    set_tasks_active(*q, true);
    dirty_.push_back(q->edr.id);
    lifecycle_.notify(q->edr.id, RequestStatus::InProgress, static_cast<int>(q->m.delivered), {}, now());
  }

  void on(const Housekeeping&) {
    while (!tombstones_.empty() && now() - tombstones_.front().first >= cfg_.tombstone_keep) {
      dir_.forget(tombstones_.front().second);
      tombstones_.pop_front();
    }
    engine_.schedule_in(SimTime::millis(250), kEngineInternal, Housekeeping{});
  }

  SimMetrics finish(std::uint64_t events) {
    m_.events = events;
    m_.duration_s = cfg_.params.duration.to_seconds();
    double lat_sum = 0.0, fid_sum = 0.0;
    for (auto& [id, q] : reqs_) {
      if (q.internal) continue;
      q.m.status = q.status;
      m_.requests.push_back(q.m);
      m_.delivered += q.m.delivered;
      lat_sum += q.m.latency_sum_s;
      fid_sum += q.m.fidelity_sum;
    }
    m_.rate = m_.duration_s > 0 ? static_cast<double>(m_.delivered) / m_.duration_s : 0.0;
    if (m_.delivered) {
      m_.mean_latency_s = lat_sum / static_cast<double>(m_.delivered);
      m_.mean_fidelity = fid_sum / static_cast<double>(m_.delivered);
    }
    return m_;
  }

  const NetworkGraph& g_;
  SimConfig cfg_;
  std::vector<Edr> workload_;
  NoiseParams noise_;
  PredistConfig predist_eff_;
  EventEngine<SimMessage> engine_;
  GemDirectory dir_;
  ResourceLedger ledger_;
  LifecycleLog lifecycle_;
  TraceSink trace_;
  int trace_level_ = 0;
  SimMetrics m_;

  std::unordered_map<EpId, Ep> eps_;
  EpId next_ep_ = 1;
  std::map<RequestId, Req> reqs_;
  std::vector<RequestId> waiting_;
  std::vector<detail::LinkRt> links_;
  std::vector<RngStream> swap_rng_;
  std::vector<int> used_;
  std::vector<std::vector<std::pair<LinkId, int>>> link_used_;
  std::vector<int> active_links_;
  std::vector<int> regular_links_;
  std::vector<std::vector<EpId>> node_eps_;
  std::vector<std::vector<RequestId>> node_reqs_;
  std::map<std::pair<LinkId, RequestId>, std::vector<EpId>> purify_buf_;
  std::map<std::pair<LinkId, RequestId>, bool> purify_busy_;
  std::deque<std::pair<SimTime, EpId>> tombstones_;
  NodeId center_ = kNoNode;
  std::vector<char> query_out_, query_again_, retry_pending_;
  SimTime first_arrival_;

  std::vector<NodePair> superlinks_;
  std::vector<int> stock_;
  std::vector<std::vector<EpId>> predist_live_;
  std::vector<PredistPairState> predist_state_;
  std::vector<char> predist_on_;
  std::vector<RequestId> dirty_;
};

inline SimMetrics simulate(const NetworkGraph& g, const std::vector<Edr>& workload, const SimConfig& cfg,
                           TraceSink sink = {}, int trace_level = 0) {
  NetworkSim sim(g, workload, cfg);
  if (sink) sim.set_trace(std::move(sink), trace_level);
  return sim.run();
}

}  // namespace qnetsim
