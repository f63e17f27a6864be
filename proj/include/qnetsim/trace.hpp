#pragma once

#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetsim/network_sim.hpp"

namespace qnetsim {

// QNETSIM_LOG: off|info|debug|gem or 0..3.
inline int trace_level_from_env(const char* var = "QNETSIM_LOG") {
  const char* v = std::getenv(var);
  if (!v || !*v) return 0;
  const std::string s(v);
  if (s == "off") return 0;
  if (s == "info") return 1;
  if (s == "debug") return 2;
  if (s == "gem" || s == "trace") return 3;
  try {
    return std::stoi(s);
  } catch (const std::exception&) {
    return 0;
  }
}

inline TraceSink jsonl_sink(std::ostream& os) {
  return [&os](const nlohmann::json& j) { os << j.dump() << '\n'; };
}

struct TraceReport {
  std::vector<std::string> errors;
  std::int64_t lines = 0;
  std::int64_t eps_seen = 0;
  std::int64_t eps_ended = 0;
  std::int64_t deliveries = 0;
  std::int64_t swaps = 0;
  int max_slot_use = 0;

  bool ok() const { return errors.empty(); }
};

// Checks a level-2 trace: time never runs backwards, every EP ends at most
// once and only after it was seen, swap inputs end with the swap, memory use
// stays within capacity, and deliveries match consumed root EPs.
inline TraceReport validate_trace(std::istream& in, std::size_t max_errors = 50) {
  TraceReport rep;
  std::set<std::int64_t> seen, ended;
  std::int64_t last_t = -1;
  std::int64_t delivered_eps = 0;
  std::string line;
  auto err = [&](const std::string& m) {
    if (rep.errors.size() < max_errors) rep.errors.push_back("line " + std::to_string(rep.lines) + ": " + m);
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rep.lines;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      err(std::string("unparsable: ") + e.what());
      continue;
    }
    const auto t = j.value("t_us", std::int64_t{-1});
    if (t < last_t) err("time went backwards");
    last_t = t;
    const std::string ev = j.value("ev", "");
    if (ev == "ep_created" || ev == "ep_available" || ev == "ep_stocked") {
      const auto id = j.at("ep").get<std::int64_t>();
      if (ended.count(id)) err("EP " + std::to_string(id) + " reappears after ending");
      if (seen.insert(id).second) ++rep.eps_seen;
    } else if (ev == "ep_end") {
      const auto id = j.at("ep").get<std::int64_t>();
      const std::string st = j.value("status", "");
      if (st != "consumed" && st != "discarded") err("EP " + std::to_string(id) + " ends as " + st);
      if (!seen.count(id)) err("EP " + std::to_string(id) + " ends without being created");
      if (!ended.insert(id).second) err("EP " + std::to_string(id) + " ends twice");
      ++rep.eps_ended;
      if (j.value("why", "") == "delivered") ++delivered_eps;
    } else if (ev == "swap") {
      ++rep.swaps;
      for (const char* k : {"left", "right"}) {
        const auto id = j.at(k).get<std::int64_t>();
        if (!ended.count(id)) err("swap input " + std::to_string(id) + " still live after the swap");
      }
    } else if (ev == "slots") {
      const int used = j.at("used").get<int>();
      const int cap = j.at("cap").get<int>();
      rep.max_slot_use = std::max(rep.max_slot_use, used);
      if (used > cap) err("node " + std::to_string(j.at("node").get<int>()) + " holds " + std::to_string(used) +
                          " qubits, capacity " + std::to_string(cap));
      if (used < 0) err("negative slot count");
    } else if (ev == "deliver") {
      ++rep.deliveries;
    }
  }
  if (rep.deliveries != delivered_eps) {
    err("deliveries " + std::to_string(rep.deliveries) + " != consumed root EPs " + std::to_string(delivered_eps));
  }
  return rep;
}

}  // namespace qnetsim
