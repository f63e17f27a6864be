#pragma once

#include <cstdint>
#include <variant>

#include "qnetsim/sim_time.hpp"
#include "qnetsim/types.hpp"

namespace qnetsim {

// Payloads carried by the simulation engine. Classical messages between
// nodes are named after the protocol step they implement; the rest are
// local timers.

// link layer
struct LinkHerald {
  LinkId link;
  std::uint64_t token;  // stale heralds are dropped
};
struct PurifyResult {  // arrives after request, accept and measurement legs
  LinkId link;
  RequestId request;
  EpId keep;
  EpId sacrifice;
};

// swapping layer
struct SwapPerform {  // BSM finished at `node`
  NodeId node;
  RequestId request;
  EpId left;
  EpId right;
};
struct SwapCorrection {  // middle node -> right partner
  EpId produced;
  NodeId left_partner;
};
struct SwapAck {  // right partner -> left partner, correction applied
  EpId produced;
};
struct SwapFail {  // middle node -> partner, drop the local qubit
  NodeId node;
  LinkId charge;
};
struct DecisionRetry {
  NodeId node;
};
struct DiscardTimer {
  EpId ep;
  std::uint32_t epoch;
};

// GEM
struct GemResponse {  // centralized round trip finished
  NodeId client;
  SimTime snapshot_at;
};

// transport / application
struct RequestGeneration {
  RequestId request;
};
struct MonitorTick {
  RequestId request;
};
struct SuspendEnd {
  RequestId request;
  std::uint32_t epoch;
};
struct PredistTick {};
struct Housekeeping {};

using SimMessage = std::variant<LinkHerald, PurifyResult, SwapPerform, SwapCorrection, SwapAck, SwapFail, DecisionRetry,
                                DiscardTimer, GemResponse, RequestGeneration, MonitorTick, SuspendEnd, PredistTick,
                                Housekeeping>;

inline const char* message_name(std::size_t index) {
  static constexpr const char* names[] = {"link_herald",  "purify_result", "swap_perform",  "swap_correction",
                                          "swap_ack",     "swap_fail",     "decision_retry", "discard_timer",
                                          "gem_response", "request_generation", "monitor_tick", "suspend_end",
                                          "predist_tick", "housekeeping"};
  return index < std::size(names) ? names[index] : "?";
}

}  // namespace qnetsim
