#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetsim/params.hpp"
#include "qnetsim/qstate.hpp"
#include "qnetsim/swap_tree.hpp"
#include "qnetsim/topology.hpp"
#include "qnetsim/types.hpp"

namespace qnetsim {

struct NoFeasiblePath : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleFidelity : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using NodePair = std::pair<NodeId, NodeId>;

inline NodePair normalized(NodeId a, NodeId b) { return {std::min(a, b), std::max(a, b)}; }

inline constexpr int kMaxPurifyRounds = 3;

// Expected latency of a swap given its children's latencies (seconds).
inline double swap_latency(double l_left, double l_right, double ct_s, const SimParams& p) {
  return (1.5 * std::max(l_left, l_right) + p.swap_latency.to_seconds() + ct_s) / p.swap_prob;
}

struct LatencyEstimate {
  std::vector<double> latency_s;  // per tree node
  std::vector<double> werner;     // per tree node
  double root_latency_s = 0.0;
  double root_fidelity = 1.0;
};

// Bottom-up evaluation. Spans listed in `zero_spans` count as already
// available (latency 0), which is how predistributed super-links are costed.
//
// Fidelity model: leaves start at the link Werner parameter; at a swap the
// slower child's partner has waited on average half of max(l_l, l_r), which
// is the decay applied to the product.
inline LatencyEstimate estimate_latency(const SwapTree& tree, const NetworkGraph& g, const SimParams& p,
                                        const std::vector<NodePair>& zero_spans = {}) {
  LatencyEstimate est;
  est.latency_s.assign(tree.size(), 0.0);
  est.werner.assign(tree.size(), 1.0);
  const NoiseParams np{p.depolar_rate, p.dephase_rate};
  auto is_zero = [&](const TreeNode& n) {
    const auto k = normalized(n.left, n.right);
    return std::find(zero_spans.begin(), zero_spans.end(), k) != zero_spans.end();
  };
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(static_cast<int>(i));
    switch (n.kind) {
      case TreeKind::Leaf: {
        const auto& l = g.link(n.link);
        est.latency_s[i] = l.expected_rate > 0 ? 1.0 / l.expected_rate : std::numeric_limits<double>::infinity();
        est.werner[i] = p.link_werner();
        break;
      }
      case TreeKind::Swap: {
        const double ll = est.latency_s[n.child_l];
        const double lr = est.latency_s[n.child_r];
        const double ct = classical_latency(g, n.left, n.right, p).to_seconds();
        est.latency_s[i] = swap_latency(ll, lr, ct, p);
        const double wait = 0.5 * std::max(ll, lr);
        WernerState a{est.werner[n.child_l], SimTime::zero()};
        WernerState b{est.werner[n.child_r], SimTime::zero()};
        WernerState s = swap_fidelity(a, b);
        s.w *= std::exp(-2.0 * np.depolar_rate * wait);
        est.werner[i] = s.w;
        break;
      }
      case TreeKind::Purify: {
        // Entanglement pumping: each round consumes one fresh copy of the child.
        const double lc = est.latency_s[n.child_l];
        const WernerState fresh{est.werner[n.child_l], SimTime::zero()};
        WernerState cur = fresh;
        double p_all = 1.0;
        for (int r = 0; r < n.rounds; ++r) {
          auto out = purify(cur, fresh);
          p_all *= out.success_prob;
          cur = out.out;
        }
        est.latency_s[i] = lc * (n.rounds + 1) / p_all;
        est.werner[i] = cur.w;
        break;
      }
    }
    if (is_zero(n)) est.latency_s[i] = 0.0;
  }
  est.root_latency_s = est.latency_s[tree.root_index()];
  est.root_fidelity = fidelity_from_werner(est.werner[tree.root_index()]);
  return est;
}

struct Plan {
  RequestId request = kNoRequest;
  NodeId src = kNoNode;
  NodeId dst = kNoNode;
  std::vector<NodeId> route;
  std::vector<LinkId> links;
  std::vector<double> link_rates;  // lambda per route link, EPs/s
  SwapTree tree;
  std::vector<NodePair> zero_spans;
  LatencyEstimate estimate;

  double root_latency_s() const { return estimate.root_latency_s; }
  double root_fidelity() const { return estimate.root_fidelity; }

  int position(NodeId n) const {
    auto it = std::find(route.begin(), route.end(), n);
    return it == route.end() ? -1 : static_cast<int>(it - route.begin());
  }
  int hops() const { return static_cast<int>(links.size()); }
};

inline Plan make_plan(RequestId id, SwapTree tree, const NetworkGraph& g, const SimParams& p,
                      std::vector<NodePair> zero_spans = {}) {
  Plan plan;
  plan.request = id;
  plan.route = tree.route();
  plan.links = tree.links();
  plan.src = plan.route.front();
  plan.dst = plan.route.back();
  for (LinkId l : plan.links) plan.link_rates.push_back(g.link(l).expected_rate);
  plan.estimate = estimate_latency(tree, g, p, zero_spans);
  plan.zero_spans = std::move(zero_spans);
  plan.tree = std::move(tree);
  return plan;
}

inline nlohmann::json plan_to_json(const Plan& p) {
  nlohmann::json spans = nlohmann::json::array();
  for (auto [a, b] : p.zero_spans) spans.push_back({a, b});
  return {{"request", p.request},
          {"src", p.src},
          {"dst", p.dst},
          {"route", p.route},
          {"links", p.links},
          {"link_rates", p.link_rates},
          {"superlinks", spans},
          {"root_latency_s", p.root_latency_s()},
          {"root_fidelity", p.root_fidelity()},
          {"tree", tree_to_json(p.tree)}};
}

inline Plan plan_from_json(const nlohmann::json& j, const NetworkGraph& g, const SimParams& p) {
  std::vector<NodePair> spans;
  if (j.contains("superlinks")) {
    for (const auto& s : j.at("superlinks")) spans.push_back(normalized(s.at(0).get<NodeId>(), s.at(1).get<NodeId>()));
  }
  return make_plan(j.value("request", kNoRequest), tree_from_json(j.at("tree")), g, p, std::move(spans));
}

// Memory slots and link capacity claimed by accepted plans.
class ResourceLedger {
 public:
  ResourceLedger() = default;
  explicit ResourceLedger(const NetworkGraph& g)
      : capacity_(g.node_count()), slots_(g.node_count(), 0), links_(g.link_count(), 0.0) {
    for (const auto& n : g.nodes()) capacity_[n.id] = n.memory_capacity;
  }

  int free_slots(NodeId n) const { return capacity_.at(n) - slots_.at(n); }
  int reserved_slots(NodeId n) const { return slots_.at(n); }
  double link_reserved(LinkId l) const { return links_.at(l); }
  bool link_free(LinkId l) const { return links_.at(l) <= 0.0; }

  bool empty() const {
    return std::all_of(slots_.begin(), slots_.end(), [](int s) { return s == 0; }) &&
           std::all_of(links_.begin(), links_.end(), [](double f) { return f <= 0.0; });
  }

  bool can_reserve(const Plan& p) const {
    for (std::size_t i = 0; i < p.route.size(); ++i) {
      if (free_slots(p.route[i]) < need(p, i)) return false;
    }
    return std::all_of(p.links.begin(), p.links.end(), [&](LinkId l) { return link_free(l); });
  }

  void reserve(const Plan& p) {
    if (!can_reserve(p)) throw std::logic_error("ledger: reservation exceeds capacity");
    for (std::size_t i = 0; i < p.route.size(); ++i) slots_[p.route[i]] += need(p, i);
    for (LinkId l : p.links) links_[l] += 1.0;
  }

  void release(const Plan& p) {
    for (std::size_t i = 0; i < p.route.size(); ++i) {
      slots_[p.route[i]] -= need(p, i);
      if (slots_[p.route[i]] < 0) throw std::logic_error("ledger: release of unreserved slots");
    }
    for (LinkId l : p.links) {
      links_[l] -= 1.0;
      if (links_[l] < -1e-12) throw std::logic_error("ledger: release of unreserved link");
    }
  }

 private:
  // One slot per incident route edge.
  static int need(const Plan& p, std::size_t i) { return (i == 0 || i + 1 == p.route.size()) ? 1 : 2; }

  std::vector<int> capacity_;
  std::vector<int> slots_;
  std::vector<double> links_;
};

// Minimum-latency swapping tree between src and dst.
//
// Label-setting over node pairs: every pair gets its best known tree; the
// cheapest unsettled pair is settled and combined with settled pairs sharing
// an endpoint. The swap latency is monotone in the child latencies, so a settled label
// is final. Node sets are tracked so that combined trees stay on simple paths.
inline Plan optimal_tree(const NetworkGraph& g, NodeId src, NodeId dst, const SimParams& p,
                         const ResourceLedger* ledger = nullptr, RequestId id = kNoRequest) {
  if (!g.has_node(src)) throw UnknownNode(src);
  if (!g.has_node(dst)) throw UnknownNode(dst);
  if (src == dst) throw std::invalid_argument("optimal_tree: src == dst");
  const auto n = static_cast<NodeId>(g.node_count());
  const std::size_t words = (static_cast<std::size_t>(n) + 63) / 64;

  struct Label {
    double latency = std::numeric_limits<double>::infinity();
    bool settled = false;
    NodeId at = kNoNode;    // swap node, or kNoNode for a link
    LinkId link = kNoLink;
    std::vector<std::uint64_t> nodes;
  };
  auto idx = [n](NodeId a, NodeId b) {
    if (a > b) std::swap(a, b);
    return static_cast<std::size_t>(a) * static_cast<std::size_t>(n) + static_cast<std::size_t>(b);
  };
  std::vector<Label> labels(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  auto free_slots = [&](NodeId v) { return ledger ? ledger->free_slots(v) : g.node(v).memory_capacity; };
  auto link_ok = [&](LinkId l) { return !ledger || ledger->link_free(l); };

  using Item = std::tuple<double, NodeId, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;

  for (const auto& l : g.links()) {
    if (!link_ok(l.id) || l.expected_rate <= 0) continue;
    if (free_slots(l.a) < 1 || free_slots(l.b) < 1) continue;
    auto& lab = labels[idx(l.a, l.b)];
    lab.latency = 1.0 / l.expected_rate;
    lab.link = l.id;
    lab.nodes.assign(words, 0);
    lab.nodes[l.a / 64] |= 1ULL << (l.a % 64);
    lab.nodes[l.b / 64] |= 1ULL << (l.b % 64);
    heap.emplace(lab.latency, l.a, l.b);
  }

  auto disjoint_except = [&](const Label& x, const Label& y, NodeId shared) {
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t both = x.nodes[w] & y.nodes[w];
      if (static_cast<std::size_t>(shared / 64) == w) both &= ~(1ULL << (shared % 64));
      if (both) return false;
    }
    return true;
  };

  auto relax = [&](NodeId u, NodeId v, NodeId x) {
    // (u, v) and (v, x) swapped at v.
    if (u == x || v == src || v == dst) return;
    if (free_slots(v) < 2) return;
    const auto& a = labels[idx(u, v)];
    const auto& b = labels[idx(v, x)];
    auto& c = labels[idx(u, x)];
    if (c.settled) return;
    const double ct = classical_latency(g, u, x, p).to_seconds();
    const double lat = swap_latency(a.latency, b.latency, ct, p);
    if (!(lat < c.latency)) return;
    if (!disjoint_except(a, b, v)) return;
    c.latency = lat;
    c.at = v;
    c.link = kNoLink;
    c.nodes.resize(words);
    for (std::size_t w = 0; w < words; ++w) c.nodes[w] = a.nodes[w] | b.nodes[w];
    heap.emplace(lat, std::min(u, x), std::max(u, x));
  };

  bool found = false;
  while (!heap.empty()) {
    auto [lat, u, v] = heap.top();
    heap.pop();
    auto& lab = labels[idx(u, v)];
    if (lab.settled || lat > lab.latency) continue;
    lab.settled = true;
    if ((u == src && v == dst) || (u == dst && v == src)) {
      found = true;
      break;
    }
    for (NodeId x = 0; x < n; ++x) {
      if (x == u || x == v) continue;
      if (labels[idx(v, x)].settled) relax(u, v, x);
      if (labels[idx(u, x)].settled) relax(v, u, x);
    }
  }
  if (!found) {
    throw NoFeasiblePath("no feasible path between " + std::to_string(src) + " and " + std::to_string(dst));
  }

  auto build = [&](auto&& self, NodeId left, NodeId right) -> SwapTree {
    const auto& lab = labels[idx(left, right)];
    if (lab.at == kNoNode) return SwapTree::leaf(lab.link, left, right);
    return SwapTree::swap(self(self, left, lab.at), self(self, lab.at, right));
  };
  return make_plan(id, build(build, src, dst), g, p);
}

// Interval DP over a fixed route. Spans in `zero_spans` are free. Returns the
// best tree and its latency.
inline std::pair<SwapTree, double> route_optimal_tree(const NetworkGraph& g, const std::vector<NodeId>& route,
                                                      const SimParams& p,
                                                      const std::vector<NodePair>& zero_spans = {}) {
  const int h = static_cast<int>(route.size()) - 1;
  if (h < 1) throw std::invalid_argument("route_optimal_tree: route needs at least one hop");
  std::vector<std::vector<double>> best(route.size(), std::vector<double>(route.size(), 0.0));
  std::vector<std::vector<int>> split(route.size(), std::vector<int>(route.size(), -1));
  auto zero = [&](int i, int j) {
    return std::find(zero_spans.begin(), zero_spans.end(), normalized(route[i], route[j])) != zero_spans.end();
  };
  for (int len = 1; len <= h; ++len) {
    for (int i = 0; i + len <= h; ++i) {
      const int j = i + len;
      double b;
      if (len == 1) {
        auto l = g.find_link(route[i], route[j]);
        if (!l) throw std::invalid_argument("route_optimal_tree: route hop is not a link");
        b = 1.0 / g.link(*l).expected_rate;
      } else {
        b = std::numeric_limits<double>::infinity();
        const double ct = classical_latency(g, route[i], route[j], p).to_seconds();
        for (int k = i + 1; k < j; ++k) {
          const double c = swap_latency(best[i][k], best[k][j], ct, p);
          if (c < b) {
            b = c;
            split[i][j] = k;
          }
        }
      }
      best[i][j] = zero(i, j) ? 0.0 : b;
    }
  }
  auto build = [&](auto&& self, int i, int j) -> SwapTree {
    if (j == i + 1) return SwapTree::leaf(*g.find_link(route[i], route[j]), route[i], route[j]);
    const int k = split[i][j];
    return SwapTree::swap(self(self, i, k), self(self, k, j));
  };
  return {build(build, 0, h), best[0][h]};
}

namespace detail {

inline SwapTree with_rounds(const SwapTree& base, int i, const std::vector<int>& rounds) {
  const auto& n = base.node(i);
  SwapTree t = n.kind == TreeKind::Leaf
                   ? SwapTree::leaf(n.link, n.left, n.right)
                   : SwapTree::swap(with_rounds(base, n.child_l, rounds), with_rounds(base, n.child_r, rounds));
  return rounds[i] > 0 ? SwapTree::purify(t, rounds[i]) : t;
}

}  // namespace detail

// Inserts purification greedily, leaves first then swap levels from the
// deepest up, one round at a time in round-robin order within a level, until
// the estimated root fidelity reaches the threshold.
inline Plan augment_with_purification(const Plan& plan, double threshold, const NetworkGraph& g,
                                      const SimParams& p) {
  if (!(threshold > 0.25 && threshold <= 1.0)) {
    throw std::invalid_argument("fidelity threshold must be in (0.25, 1]");
  }
  if (plan.root_fidelity() >= threshold) return plan;
  for (const auto& n : plan.tree.nodes()) {
    if (n.kind == TreeKind::Purify) throw std::invalid_argument("plan already contains purification");
  }
  const SwapTree& base = plan.tree;
  std::vector<std::vector<int>> levels;
  levels.push_back(base.leaves());
  const int h = base.height();
  for (int d = h; d >= 0; --d) {
    std::vector<int> lv;
    for (std::size_t i = 0; i < base.size(); ++i) {
      const auto& n = base.node(static_cast<int>(i));
      if (n.kind == TreeKind::Swap && n.depth == d) lv.push_back(static_cast<int>(i));
    }
    if (!lv.empty()) levels.push_back(std::move(lv));
  }
  std::vector<int> rounds(base.size(), 0);
  for (const auto& lv : levels) {
    for (int r = 1; r <= kMaxPurifyRounds; ++r) {
      for (int i : lv) {
        rounds[i] = r;
        SwapTree t = detail::with_rounds(base, base.root_index(), rounds);
        auto est = estimate_latency(t, g, p, plan.zero_spans);
        if (est.root_fidelity >= threshold) return make_plan(plan.request, std::move(t), g, p, plan.zero_spans);
      }
    }
  }
  throw InfeasibleFidelity("fidelity " + std::to_string(threshold) + " unreachable with " +
                           std::to_string(kMaxPurifyRounds) + " rounds per node");
}

struct PlanRequest {
  RequestId id = kNoRequest;
  NodeId src = kNoNode;
  NodeId dst = kNoNode;
  std::optional<double> fidelity_threshold;
};

struct Rejection {
  RequestId id;
  std::string reason;
};

struct BatchResult {
  std::vector<Plan> plans;
  std::vector<Rejection> rejected;
};

// Plans requests in order, reserving each accepted plan before the next.
inline BatchResult plan_batch_iterative(const NetworkGraph& g, const std::vector<PlanRequest>& requests,
                                        const SimParams& p, ResourceLedger& ledger) {
  BatchResult out;
  for (const auto& r : requests) {
    try {
      Plan plan = optimal_tree(g, r.src, r.dst, p, &ledger, r.id);
      if (r.fidelity_threshold) plan = augment_with_purification(plan, *r.fidelity_threshold, g, p);
      ledger.reserve(plan);
      out.plans.push_back(std::move(plan));
    } catch (const NoFeasiblePath& e) {
      out.rejected.push_back({r.id, e.what()});
    } catch (const InfeasibleFidelity& e) {
      out.rejected.push_back({r.id, e.what()});
    }
  }
  return out;
}

inline BatchResult plan_batch_iterative(const NetworkGraph& g, const std::vector<PlanRequest>& requests,
                                        const SimParams& p) {
  ResourceLedger ledger(g);
  return plan_batch_iterative(g, requests, p, ledger);
}

// Greedy super-link choice. Each anticipated pair keeps its unconstrained
// optimal route; a candidate's benefit is the summed latency drop of the
// route-optimal trees when the candidate span is free, divided by the
// candidate's own optimal generation latency.
inline std::vector<NodePair> select_superlinks(const NetworkGraph& g, const std::vector<NodePair>& anticipated,
                                               int k, const SimParams& p) {
  if (k < 1) throw std::invalid_argument("select_superlinks: k must be >= 1");
  std::vector<NodePair> chosen;
  if (anticipated.empty()) return chosen;
  std::vector<std::vector<NodeId>> routes;
  for (auto [s, d] : anticipated) {
    try {
      routes.push_back(optimal_tree(g, s, d, p).route);
    } catch (const NoFeasiblePath&) {
    }
  }
  std::set<NodePair> candidates;
  for (const auto& r : routes) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (std::size_t j = i + 1; j < r.size(); ++j) candidates.insert(normalized(r[i], r[j]));
    }
  }
  std::map<NodePair, double> own_cost;
  auto cost = [&](NodePair c) {
    auto it = own_cost.find(c);
    if (it != own_cost.end()) return it->second;
    const double v = optimal_tree(g, c.first, c.second, p).root_latency_s();
    own_cost[c] = v;
    return v;
  };
  auto total = [&](const std::vector<NodePair>& zero) {
    double s = 0.0;
    for (const auto& r : routes) s += route_optimal_tree(g, r, p, zero).second;
    return s;
  };
  while (static_cast<int>(chosen.size()) < k) {
    const double base = total(chosen);
    std::optional<NodePair> best;
    double best_ratio = -1.0;
    for (const auto& c : candidates) {
      if (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) continue;
      auto trial = chosen;
      trial.push_back(c);
      const double ratio = (base - total(trial)) / cost(c);
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best = c;
      }
    }
    if (!best) break;
    chosen.push_back(*best);
  }
  return chosen;
}

}  // namespace qnetsim
