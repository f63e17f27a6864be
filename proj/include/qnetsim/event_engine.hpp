#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qnetsim/sim_time.hpp"
#include "qnetsim/types.hpp"

namespace qnetsim {

struct SchedulingInPast : std::logic_error {
  SchedulingInPast(SimTime at, SimTime clock)
      : std::logic_error("event scheduled at " + std::to_string(at.count()) +
                         "us before clock " + std::to_string(clock.count()) + "us") {}
};

struct UnknownNode : std::out_of_range {
  explicit UnknownNode(NodeId id) : std::out_of_range("unknown node " + std::to_string(id)) {}
};

template <class Payload>
struct Event {
  SimTime fire_at;
  std::uint64_t seq = 0;
  NodeId target = kEngineInternal;
  Payload payload;
};

struct SimSummary {
  SimTime clock;
  std::uint64_t events_processed = 0;
  // Indexed by the payload variant's alternative index.
  std::vector<std::uint64_t> events_by_kind;
};

// Single-threaded discrete-event engine. Events pop in (fire_at, seq) order,
// seq being assigned at scheduling time, so equal-time events run in the
// order they were scheduled.
template <class Payload>
class EventEngine {
 public:
  using event_type = Event<Payload>;

  SimTime now() const { return clock_; }
  std::size_t pending() const { return queue_.size(); }
  std::uint64_t next_seq() const { return seq_; }

  std::uint64_t schedule(SimTime at, NodeId target, Payload payload) {
    if (at < clock_) throw SchedulingInPast(at, clock_);
    const std::uint64_t seq = seq_++;
    queue_.push(event_type{at, seq, target, std::move(payload)});
    return seq;
  }

  std::uint64_t schedule_in(SimTime delay, NodeId target, Payload payload) {
    return schedule(clock_ + delay, target, std::move(payload));
  }

  // Processes every event with fire_at <= t_end, then parks the clock at t_end.
  template <class Handler>
  SimSummary run_until(SimTime t_end, Handler&& handler) {
    while (!queue_.empty() && queue_.top().fire_at <= t_end) {
      event_type ev = queue_.top();
      queue_.pop();
      clock_ = ev.fire_at;
      ++summary_.events_processed;
      count_kind(ev.payload);
      handler(ev);
    }
    if (clock_ < t_end) clock_ = t_end;
    summary_.clock = clock_;
    return summary_;
  }

  const SimSummary& summary() const { return summary_; }

  void clear() {
    queue_ = {};
  }

 private:
  struct Later {
    bool operator()(const event_type& a, const event_type& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.seq > b.seq;
    }
  };

  void count_kind(const Payload& p) {
    std::size_t idx = 0;
    if constexpr (requires { p.index(); }) idx = p.index();
    if (summary_.events_by_kind.size() <= idx) summary_.events_by_kind.resize(idx + 1, 0);
    ++summary_.events_by_kind[idx];
  }

  SimTime clock_ = SimTime::zero();
  std::uint64_t seq_ = 0;
  std::priority_queue<event_type, std::vector<event_type>, Later> queue_;
  SimSummary summary_;
};

// Classical message delivery on top of an engine. The latency model is
// injected so the engine stays topology-agnostic.
template <class Payload>
class ClassicalChannel {
 public:
  using LatencyFn = std::function<SimTime(NodeId, NodeId)>;
  using NodeCheck = std::function<bool(NodeId)>;

  ClassicalChannel(EventEngine<Payload>& engine, LatencyFn latency, NodeCheck exists)
      : engine_(engine), latency_(std::move(latency)), exists_(std::move(exists)) {}

  // Returns the delivery time.
  SimTime send(NodeId src, NodeId dst, Payload msg) {
    if (!exists_(src)) throw UnknownNode(src);
    if (!exists_(dst)) throw UnknownNode(dst);
    if (src == dst) throw std::invalid_argument("send_classical: src == dst");
    SimTime lat = latency_(src, dst);
    if (lat < SimTime::micros(1)) lat = SimTime::micros(1);
    const SimTime at = engine_.now() + lat;
    engine_.schedule(at, dst, std::move(msg));
    ++messages_sent_;
    return at;
  }

  // One delivery per node other than src.
  std::size_t broadcast(NodeId src, const std::vector<NodeId>& nodes, const Payload& msg) {
    std::size_t n = 0;
    for (NodeId dst : nodes) {
      if (dst == src) continue;
      send(src, dst, msg);
      ++n;
    }
    return n;
  }

  std::uint64_t messages_sent() const { return messages_sent_; }

 private:
  EventEngine<Payload>& engine_;
  LatencyFn latency_;
  NodeCheck exists_;
  std::uint64_t messages_sent_ = 0;
};

}  // namespace qnetsim
