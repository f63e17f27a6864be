#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetsim/event_engine.hpp"
#include "qnetsim/params.hpp"
#include "qnetsim/rng.hpp"
#include "qnetsim/sim_time.hpp"

namespace qnetsim {

struct Position {
  double x = 0.0;
  double y = 0.0;
};

inline double distance_km(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Node {
  NodeId id = 0;
  Position pos;
  int memory_capacity = 5;
};

struct Link {
  LinkId id = 0;
  NodeId a = 0;
  NodeId b = 0;
  double length_km = 0.0;
  double p_transmit = 1.0;
  double p_link = 0.0;
  SimTime attempt_period = SimTime::micros(50);
  double expected_rate = 0.0;  // EPs per second

  NodeId other(NodeId n) const { return n == a ? b : a; }
  bool has(NodeId n) const { return n == a || n == b; }
};

struct Adjacent {
  NodeId neighbor;
  LinkId link;
};

struct DensityUnreachable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Undirected simple graph of quantum nodes and fiber links. Immutable once
// built; runtime memory occupancy lives in the simulation, not here.
class NetworkGraph {
 public:
  NodeId add_node(Position pos, int memory_capacity = 5) {
    const auto id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(Node{id, pos, memory_capacity});
    adjacency_.emplace_back();
    return id;
  }

  LinkId add_link(NodeId a, NodeId b) {
    check(a);
    check(b);
    if (a == b) throw std::invalid_argument("add_link: self loop");
    if (find_link(a, b)) throw std::invalid_argument("add_link: duplicate link");
    const auto id = static_cast<LinkId>(links_.size());
    Link l;
    l.id = id;
    l.a = std::min(a, b);
    l.b = std::max(a, b);
    l.length_km = distance_km(nodes_[a].pos, nodes_[b].pos);
    links_.push_back(l);
    adjacency_[a].push_back({b, id});
    adjacency_[b].push_back({a, id});
    index_[key(a, b)] = id;
    return id;
  }

  void remove_link(LinkId id) {
    // Rebuilds ids; only used while generating.
    std::vector<std::pair<NodeId, NodeId>> keep;
    for (const auto& l : links_) {
      if (l.id != id) keep.emplace_back(l.a, l.b);
    }
    links_.clear();
    index_.clear();
    for (auto& adj : adjacency_) adj.clear();
    for (auto [a, b] : keep) add_link(a, b);
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t link_count() const { return links_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  std::vector<Link>& mutable_links() { return links_; }

  bool has_node(NodeId n) const { return n >= 0 && static_cast<std::size_t>(n) < nodes_.size(); }
  const Node& node(NodeId n) const {
    check(n);
    return nodes_[n];
  }
  const Link& link(LinkId id) const { return links_.at(static_cast<std::size_t>(id)); }
  std::span<const Adjacent> neighbors(NodeId n) const {
    check(n);
    return adjacency_[n];
  }

  std::optional<LinkId> find_link(NodeId a, NodeId b) const {
    auto it = index_.find(key(a, b));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  double distance(NodeId a, NodeId b) const { return distance_km(node(a).pos, node(b).pos); }

  // Density against the complete graph.
  double density() const {
    const double n = static_cast<double>(nodes_.size());
    if (n < 2) return 0.0;
    return static_cast<double>(links_.size()) / (n * (n - 1) / 2.0);
  }

  bool connected() const {
    if (nodes_.empty()) return true;
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<NodeId> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      for (const auto& adj : adjacency_[u]) {
        if (!seen[adj.neighbor]) {
          seen[adj.neighbor] = 1;
          ++count;
          stack.push_back(adj.neighbor);
        }
      }
    }
    return count == nodes_.size();
  }

  // Minimum hop count between two nodes, or -1 when unreachable.
  int hop_distance(NodeId s, NodeId d) const {
    std::vector<int> dist(nodes_.size(), -1);
    std::vector<NodeId> frontier{s};
    dist[s] = 0;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      NodeId u = frontier[i];
      if (u == d) return dist[u];
      for (const auto& adj : adjacency_[u]) {
        if (dist[adj.neighbor] < 0) {
          dist[adj.neighbor] = dist[u] + 1;
          frontier.push_back(adj.neighbor);
        }
      }
    }
    return dist[d];
  }

  // Node closest to the geometric center of the bounding square [0, side]^2.
  NodeId center_node(double side_km) const {
    const Position c{side_km / 2.0, side_km / 2.0};
    NodeId best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& n : nodes_) {
      const double d = distance_km(n.pos, c);
      if (d < best_d) {
        best_d = d;
        best = n.id;
      }
    }
    return best;
  }

 private:
  static std::uint64_t key(NodeId a, NodeId b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
  }
  void check(NodeId n) const {
    if (!has_node(n)) throw UnknownNode(n);
  }

  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<std::vector<Adjacent>> adjacency_;
  std::unordered_map<std::uint64_t, LinkId> index_;
};

// Photon survival over a fiber of the given length.
inline double transmit_probability(double length_km, double attenuation_km) {
  return std::exp(-length_km / (2.0 * attenuation_km));
}

// Meet-in-the-middle link: atom-photon generation at both ends, transmission
// loss, then an optical BSM at the midpoint station.
inline Link derive_link_params(Link link, const SimParams& params) {
  link.p_transmit = transmit_probability(link.length_km, params.attenuation_km);
  link.p_link = params.gen_prob * params.gen_prob * link.p_transmit * params.optical_bsm_prob;
  link.attempt_period = params.gen_period;
  link.expected_rate = link.p_link / params.gen_period.to_seconds();
  return link;
}

inline void derive_all_link_params(NetworkGraph& g, const SimParams& params) {
  for (auto& l : g.mutable_links()) l = derive_link_params(l, params);
}

inline SimTime classical_latency_km(double distance, double fiber_speed_km_s) {
  const SimTime t = SimTime::from_seconds(distance / fiber_speed_km_s);
  return std::max(t, SimTime::micros(1));
}

inline SimTime classical_latency(const NetworkGraph& g, NodeId a, NodeId b, const SimParams& params) {
  return classical_latency_km(g.distance(a, b), params.fiber_speed_km_s);
}

struct WaxmanOptions {
  int nodes = 100;
  double side_km = 100.0;
  double target_density = 0.1;
  double alpha = 0.4;
  int memory_capacity = 5;
  double tolerance = 0.10;
  int natural_attempts = 10;
};

namespace detail {

inline std::vector<int> components(const NetworkGraph& g) {
  std::vector<int> comp(g.node_count(), -1);
  int c = 0;
  for (std::size_t s = 0; s < g.node_count(); ++s) {
    if (comp[s] >= 0) continue;
    std::vector<NodeId> stack{static_cast<NodeId>(s)};
    comp[s] = c;
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      for (const auto& adj : g.neighbors(u)) {
        if (comp[adj.neighbor] < 0) {
          comp[adj.neighbor] = c;
          stack.push_back(adj.neighbor);
        }
      }
    }
    ++c;
  }
  return comp;
}

// Joins every component to the one holding node 0 through its shortest
// crossing pair, tops up with Waxman-weighted random links if short, then
// drops random non-bridge links until the edge count is back at the target.
template <class Weight>
void repair_connectivity(NetworkGraph& g, std::size_t target_edges, RngStream& rng, Weight&& weight) {
  for (;;) {
    auto comp = components(g);
    if (*std::max_element(comp.begin(), comp.end()) == 0) break;
    double best = std::numeric_limits<double>::infinity();
    NodeId ba = 0, bb = 0;
    for (std::size_t a = 0; a < g.node_count(); ++a) {
      if (comp[a] != 0) continue;
      for (std::size_t b = 0; b < g.node_count(); ++b) {
        if (comp[b] == 0) continue;
        const double d = g.distance(static_cast<NodeId>(a), static_cast<NodeId>(b));
        if (d < best) {
          best = d;
          ba = static_cast<NodeId>(a);
          bb = static_cast<NodeId>(b);
        }
      }
    }
    g.add_link(ba, bb);
  }
  const auto n = static_cast<std::uint64_t>(g.node_count());
  const std::size_t max_edges = static_cast<std::size_t>(n * (n - 1) / 2);
  while (g.link_count() < std::min(target_edges, max_edges)) {
    const auto a = static_cast<NodeId>(rng.uniform_index(n));
    const auto b = static_cast<NodeId>(rng.uniform_index(n));
    if (a == b || g.find_link(a, b)) continue;
    if (rng.bernoulli(weight(a, b))) g.add_link(a, b);
  }
  int failures = 0;
  while (g.link_count() > target_edges && failures < 4 * static_cast<int>(g.link_count())) {
    const auto victim = static_cast<LinkId>(rng.uniform_index(g.link_count()));
    NetworkGraph trial = g;
    trial.remove_link(victim);
    if (trial.connected()) {
      g = std::move(trial);
      failures = 0;
    } else {
      ++failures;
    }
  }
}

}  // namespace detail

// Waxman random graph over a square. The Waxman beta is solved so that the
// expected edge count matches the target density; alpha is fixed.
inline NetworkGraph generate_waxman(const WaxmanOptions& opt, std::uint64_t seed) {
  if (opt.nodes < 2) throw std::invalid_argument("generate_waxman: need at least 2 nodes");
  if (!(opt.target_density > 0.0 && opt.target_density <= 1.0)) {
    throw std::invalid_argument("generate_waxman: density must be in (0, 1]");
  }
  const std::size_t n = static_cast<std::size_t>(opt.nodes);
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double target = opt.target_density * pairs;
  const auto target_edges = static_cast<std::size_t>(std::max(1.0, std::round(target)));
  const double lo_ok = target * (1.0 - opt.tolerance);
  const double hi_ok = target * (1.0 + opt.tolerance);
  if (hi_ok < static_cast<double>(n - 1)) {
    throw DensityUnreachable("density " + std::to_string(opt.target_density) +
                             " cannot hold a connected graph on " + std::to_string(n) + " nodes");
  }

  RngStream rng(seed, 0, RngPurpose::Topology);
  for (int attempt = 0; attempt <= opt.natural_attempts; ++attempt) {
    NetworkGraph g;
    for (std::size_t i = 0; i < n; ++i) {
      g.add_node({rng.uniform01() * opt.side_km, rng.uniform01() * opt.side_km}, opt.memory_capacity);
    }
    double dmax = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        dmax = std::max(dmax, g.distance(static_cast<NodeId>(i), static_cast<NodeId>(j)));
    if (dmax <= 0.0) dmax = 1.0;

    std::vector<double> q;
    q.reserve(static_cast<std::size_t>(pairs));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        q.push_back(std::exp(-g.distance(static_cast<NodeId>(i), static_cast<NodeId>(j)) / (opt.alpha * dmax)));

    auto expected = [&](double beta) {
      double s = 0.0;
      for (double v : q) s += std::min(1.0, beta * v);
      return s;
    };
    double lo = 0.0, hi = 1.0;
    while (expected(hi) < target && hi < 1e12) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (expected(mid) < target ? lo : hi) = mid;
    }
    const double beta = hi;

    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j, ++k) {
        if (rng.bernoulli(std::min(1.0, beta * q[k]))) {
          g.add_link(static_cast<NodeId>(i), static_cast<NodeId>(j));
        }
      }
    }
    const double edges = static_cast<double>(g.link_count());
    const bool density_ok = edges >= lo_ok && edges <= hi_ok;
    if (g.connected() && density_ok) return g;
    if (attempt == opt.natural_attempts) {
      detail::repair_connectivity(g, target_edges, rng, [&](NodeId a, NodeId b) {
        return std::max(1e-6, std::min(1.0, beta * std::exp(-g.distance(a, b) / (opt.alpha * dmax))));
      });
      const double e2 = static_cast<double>(g.link_count());
      if (g.connected() && e2 >= lo_ok && e2 <= hi_ok) return g;
    }
  }
  throw DensityUnreachable("could not generate a connected Waxman graph at density " +
                           std::to_string(opt.target_density));
}

// Convenience: generate and populate link physics from params.
inline NetworkGraph generate_network(const SimParams& params, std::uint64_t seed) {
  WaxmanOptions opt;
  opt.nodes = params.nodes;
  opt.side_km = params.side_km;
  opt.target_density = params.density;
  opt.alpha = params.waxman_alpha;
  opt.memory_capacity = params.memory_slots;
  NetworkGraph g = generate_waxman(opt, seed);
  derive_all_link_params(g, params);
  return g;
}

inline nlohmann::json graph_to_json(const NetworkGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes()) {
    nodes.push_back({{"id", n.id}, {"x", n.pos.x}, {"y", n.pos.y}, {"memory", n.memory_capacity}});
  }
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : g.links()) {
    links.push_back({{"a", l.a}, {"b", l.b}, {"length_km", l.length_km}});
  }
  return {{"nodes", nodes}, {"links", links}};
}

// Link physics are re-derived from params; lengths in the file are informational.
inline NetworkGraph graph_from_json(const nlohmann::json& j, const SimParams& params) {
  NetworkGraph g;
  const auto& nodes = j.at("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.value("id", static_cast<int>(i)) != static_cast<int>(i)) {
      throw std::invalid_argument("graph_from_json: node ids must be 0..n-1 in order");
    }
    g.add_node({n.at("x").get<double>(), n.at("y").get<double>()}, n.value("memory", params.memory_slots));
  }
  for (const auto& l : j.at("links")) g.add_link(l.at("a").get<NodeId>(), l.at("b").get<NodeId>());
  derive_all_link_params(g, params);
  return g;
}

}  // namespace qnetsim
