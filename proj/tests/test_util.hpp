#pragma once

#include <utility>
#include <vector>

#include "qnetsim/params.hpp"
#include "qnetsim/topology.hpp"
#include "qnetsim/transport.hpp"

namespace testutil {

// Nodes on the x axis at the given coordinates, linked consecutively.
inline qnetsim::NetworkGraph chain(const std::vector<double>& xs, const qnetsim::SimParams& p = {}) {
  qnetsim::NetworkGraph g;
  for (double x : xs) g.add_node({x, 0.0}, p.memory_slots);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    g.add_link(static_cast<qnetsim::NodeId>(i), static_cast<qnetsim::NodeId>(i + 1));
  }
  qnetsim::derive_all_link_params(g, p);
  return g;
}

inline qnetsim::NetworkGraph from_edges(const std::vector<qnetsim::Position>& pos,
                                        const std::vector<std::pair<int, int>>& edges,
                                        const qnetsim::SimParams& p = {}) {
  qnetsim::NetworkGraph g;
  for (auto q : pos) g.add_node(q, p.memory_slots);
  for (auto [a, b] : edges) g.add_link(a, b);
  qnetsim::derive_all_link_params(g, p);
  return g;
}

// Monitor samples at `rate` per second covering [0, now), half a period off
// the grid so window edges never land on a sample.
inline std::vector<qnetsim::Sample> samples(double rate, double f, double now_s) {
  std::vector<qnetsim::Sample> v;
  const int n = static_cast<int>(now_s * rate);
  for (int k = n - 1; k >= 0; --k) v.push_back({qnetsim::SimTime::from_seconds(now_s - (k + 0.5) / rate), f});
  return v;
}

}  // namespace testutil
