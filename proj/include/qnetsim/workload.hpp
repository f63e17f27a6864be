#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetsim/params.hpp"
#include "qnetsim/rng.hpp"
#include "qnetsim/sim_time.hpp"
#include "qnetsim/topology.hpp"
#include "qnetsim/types.hpp"

namespace qnetsim {

struct FixedCount {
  int n = 1;
};
struct RateMaxFidelity {
  double rate = 1.0;
};
struct MaxRateMinFidelity {
  double min_fidelity = 0.5;
};
struct RateAndFidelity {
  double rate = 1.0;
  double min_fidelity = 0.5;
};

using Requirement = std::variant<FixedCount, RateMaxFidelity, MaxRateMinFidelity, RateAndFidelity>;

inline std::optional<double> required_rate(const Requirement& r) {
  if (auto* a = std::get_if<RateMaxFidelity>(&r)) return a->rate;
  if (auto* b = std::get_if<RateAndFidelity>(&r)) return b->rate;
  return std::nullopt;
}

inline std::optional<double> required_fidelity(const Requirement& r) {
  if (auto* a = std::get_if<MaxRateMinFidelity>(&r)) return a->min_fidelity;
  if (auto* b = std::get_if<RateAndFidelity>(&r)) return b->min_fidelity;
  return std::nullopt;
}

inline std::optional<int> required_count(const Requirement& r) {
  if (auto* a = std::get_if<FixedCount>(&r)) return a->n;
  return std::nullopt;
}

struct Edr {
  RequestId id = 0;
  NodeId src = kNoNode;
  NodeId dst = kNoNode;
  Requirement requirement = MaxRateMinFidelity{};
  std::optional<int> priority;
  SimTime arrival;
};

struct WorkloadSpec {
  int requests = 15;
  SimTime interval = SimTime::seconds(5);
  SimTime offset = SimTime::zero();
  int min_hops = 2;
  Requirement requirement = MaxRateMinFidelity{0.5};
  std::uint64_t seed = 1;
};

// Endpoints drawn uniformly among pairs at least `min_hops` apart; request i
// arrives at offset + i * interval.
inline std::vector<Edr> generate_workload(const WorkloadSpec& spec, const NetworkGraph& g) {
  if (g.node_count() < 2) throw std::invalid_argument("generate_workload: graph needs at least 2 nodes");
  std::vector<std::pair<NodeId, NodeId>> eligible;
  const auto n = static_cast<NodeId>(g.node_count());
  for (NodeId a = 0; a < n; ++a) {
    std::vector<int> dist(g.node_count(), -1);
    std::vector<NodeId> q{a};
    dist[a] = 0;
    for (std::size_t k = 0; k < q.size(); ++k) {
      for (const auto& adj : g.neighbors(q[k])) {
        if (dist[adj.neighbor] < 0) {
          dist[adj.neighbor] = dist[q[k]] + 1;
          q.push_back(adj.neighbor);
        }
      }
    }
    for (NodeId b = 0; b < n; ++b) {
      if (b != a && dist[b] >= spec.min_hops) eligible.emplace_back(a, b);
    }
  }
  if (eligible.empty()) throw std::invalid_argument("generate_workload: no node pair is far enough apart");
  RngStream rng(spec.seed, 0, RngPurpose::Workload);
  std::vector<Edr> out;
  for (int i = 0; i < spec.requests; ++i) {
    const auto [s, d] = eligible[rng.uniform_index(eligible.size())];
    Edr e;
    e.id = i + 1;
    e.src = s;
    e.dst = d;
    e.requirement = spec.requirement;
    e.arrival = spec.offset + spec.interval * i;
    out.push_back(e);
  }
  return out;
}

inline nlohmann::json requirement_to_json(const Requirement& r) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, FixedCount>) return {{"type", "fixed_count"}, {"count", v.n}};
        if constexpr (std::is_same_v<T, RateMaxFidelity>) return {{"type", "rate_max_fidelity"}, {"rate", v.rate}};
        if constexpr (std::is_same_v<T, MaxRateMinFidelity>) {
          return {{"type", "max_rate_min_fidelity"}, {"min_fidelity", v.min_fidelity}};
        }
        if constexpr (std::is_same_v<T, RateAndFidelity>) {
          return {{"type", "rate_and_fidelity"}, {"rate", v.rate}, {"min_fidelity", v.min_fidelity}};
        }
      },
      r);
}

inline Requirement requirement_from_json(const nlohmann::json& j) {
  const auto t = j.at("type").get<std::string>();
  std::vector<std::string> errs;
  Requirement r;
  if (t == "fixed_count") {
    r = FixedCount{j.at("count").get<int>()};
    if (std::get<FixedCount>(r).n < 1) errs.push_back("requirement.count: must be >= 1");
  } else if (t == "rate_max_fidelity") {
    r = RateMaxFidelity{j.at("rate").get<double>()};
  } else if (t == "max_rate_min_fidelity") {
    r = MaxRateMinFidelity{j.at("min_fidelity").get<double>()};
  } else if (t == "rate_and_fidelity") {
    r = RateAndFidelity{j.at("rate").get<double>(), j.at("min_fidelity").get<double>()};
  } else {
    errs.push_back("requirement.type: unknown '" + t + "'");
  }
  if (errs.empty()) {
    if (auto rate = required_rate(r); rate && !(*rate > 0)) errs.push_back("requirement.rate: must be > 0");
    if (auto f = required_fidelity(r); f && !(*f > 0.25 && *f <= 1)) {
      errs.push_back("requirement.min_fidelity: must be in (0.25, 1]");
    }
  }
  if (!errs.empty()) throw ConfigInvalid(std::move(errs));
  return r;
}

inline nlohmann::json workload_to_json(const std::vector<Edr>& w) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : w) {
    nlohmann::json j{{"id", e.id},
                     {"src", e.src},
                     {"dst", e.dst},
                     {"arrival_us", e.arrival.count()},
                     {"requirement", requirement_to_json(e.requirement)}};
    if (e.priority) j["priority"] = *e.priority;
    arr.push_back(j);
  }
  return {{"requests", arr}};
}

inline std::vector<Edr> workload_from_json(const nlohmann::json& j) {
  std::vector<Edr> out;
  for (const auto& r : j.at("requests")) {
    Edr e;
    e.id = r.at("id").get<RequestId>();
    e.src = r.at("src").get<NodeId>();
    e.dst = r.at("dst").get<NodeId>();
    if (e.src == e.dst) throw ConfigInvalid({"request " + std::to_string(e.id) + ": src == dst"});
    e.arrival = SimTime::micros(r.value("arrival_us", std::int64_t{0}));
    e.requirement = requirement_from_json(r.at("requirement"));
    if (r.contains("priority")) e.priority = r.at("priority").get<int>();
    out.push_back(e);
  }
  return out;
}

enum class RequestStatus { Pending, InProgress, Suspended, Completed, Failed };

inline const char* to_string(RequestStatus s) {
  switch (s) {
    case RequestStatus::Pending: return "pending";
    case RequestStatus::InProgress: return "in_progress";
    case RequestStatus::Suspended: return "suspended";
    case RequestStatus::Completed: return "completed";
    case RequestStatus::Failed: return "failed";
  }
  return "?";
}

struct UnknownRequest : std::out_of_range {
  explicit UnknownRequest(RequestId id) : std::out_of_range("unknown request " + std::to_string(id)) {}
};

struct LifecycleEntry {
  SimTime t;
  RequestId request;
  RequestStatus status;
  int generated;
  std::string error;
};

// Status notifications delivered to the application.
class LifecycleLog {
 public:
  void add_request(const Edr& e) { status_[e.id] = RequestStatus::Pending; }

  void notify(RequestId id, RequestStatus s, int generated, std::string error = {}, SimTime t = {}) {
    auto it = status_.find(id);
    if (it == status_.end()) throw UnknownRequest(id);
    it->second = s;
    entries_.push_back({t, id, s, generated, std::move(error)});
  }

  RequestStatus status(RequestId id) const {
    auto it = status_.find(id);
    if (it == status_.end()) throw UnknownRequest(id);
    return it->second;
  }

  const std::vector<LifecycleEntry>& entries() const { return entries_; }
  const std::map<RequestId, RequestStatus>& statuses() const { return status_; }

 private:
  std::map<RequestId, RequestStatus> status_;
  std::vector<LifecycleEntry> entries_;
};

}  // namespace qnetsim
