#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "qnetsim/planner.hpp"
#include "qnetsim/sim_time.hpp"
#include "qnetsim/types.hpp"

namespace qnetsim {

enum class PolicyKind { OldestFirst, YoungestFirst, LongestHop, ShortestHop, Scoring, FixedTree, SwapAsap, Connectionless };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::OldestFirst: return "oldest";
    case PolicyKind::YoungestFirst: return "youngest";
    case PolicyKind::LongestHop: return "longest";
    case PolicyKind::ShortestHop: return "shortest";
    case PolicyKind::Scoring: return "scoring";
    case PolicyKind::FixedTree: return "fixed";
    case PolicyKind::SwapAsap: return "asap";
    case PolicyKind::Connectionless: return "connectionless";
  }
  return "?";
}

inline PolicyKind policy_from_string(const std::string& s) {
  for (auto k : {PolicyKind::OldestFirst, PolicyKind::YoungestFirst, PolicyKind::LongestHop, PolicyKind::ShortestHop,
                 PolicyKind::Scoring, PolicyKind::FixedTree, PolicyKind::SwapAsap, PolicyKind::Connectionless}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown policy: " + s);
}

// Policies that pick swaps from the GEM at run time.
inline bool is_adaptive(PolicyKind k) {
  return k == PolicyKind::OldestFirst || k == PolicyKind::YoungestFirst || k == PolicyKind::LongestHop ||
         k == PolicyKind::ShortestHop || k == PolicyKind::Scoring;
}

struct ScoringParams {
  double alpha = 1.0;
  double gamma = -0.5;
  double delta = 0.2;
  double beta1 = 0.5;
  double beta2 = 0.5;
  std::optional<SimTime> cutoff_age;  // defaults to the plan's L_target
};

struct DiscardPolicy {
  SimTime l_target = SimTime::seconds(1);
  double rho = 0.7;
  bool depth_aware = true;

  SimTime cutoff(int depth) const {
    if (!depth_aware || depth <= 0) return l_target;
    return SimTime::from_seconds(std::pow(rho, depth) * l_target.to_seconds());
  }
  bool expired(SimTime age, int depth) const { return age > cutoff(depth); }
};

// Fraction of the route's links covered by the given EPs. EPs with an
// endpoint off the route cover nothing.
inline double rcomp(const std::vector<NodeId>& route, const std::vector<NodePair>& eps) {
  const int hops = static_cast<int>(route.size()) - 1;
  if (hops <= 0) return 0.0;
  std::vector<char> covered(static_cast<std::size_t>(hops), 0);
  auto pos = [&](NodeId n) {
    auto it = std::find(route.begin(), route.end(), n);
    return it == route.end() ? -1 : static_cast<int>(it - route.begin());
  };
  for (auto [u, v] : eps) {
    int a = pos(u), b = pos(v);
    if (a < 0 || b < 0 || a == b) continue;
    if (a > b) std::swap(a, b);
    for (int k = a; k < b; ++k) covered[k] = 1;
  }
  return static_cast<double>(std::count(covered.begin(), covered.end(), 1)) / hops;
}

struct SwapCandidate {
  NodeId m = kNoNode;
  EpId left = 0;   // EP (i, m)
  EpId right = 0;  // EP (m, j)
  NodeId i = kNoNode;
  NodeId j = kNoNode;
  SimTime age_left;
  SimTime age_right;
  RequestId request = kNoRequest;
  int hop_span = 0;  // hops between i and j along the route
  int depth = 0;     // plan depth of the resulting EP

  SimTime age_new() const { return std::max(age_left, age_right); }
  NodePair result() const { return normalized(i, j); }
};

struct AgeExceeded : std::logic_error {
  AgeExceeded() : std::logic_error("candidate age exceeds the cutoff") {}
};

// What the scoring rule needs to know about the node and its plans.
struct ScoreContext {
  std::vector<const std::vector<NodeId>*> routes;  // plans the candidate may serve
  std::vector<NodePair> available;                 // usable EPs in the deciding node's view
  struct Partner {
    NodeId b;
    double lambda;  // planned generation rate of (b, m), EPs/s
  };
  std::vector<Partner> partners;  // prescribed partners of m with no EP yet
  int waiting_load = 0;
  double mem_load = 0.0;
  SimTime cutoff_age = SimTime::seconds(1);
};

inline double desirability(const ScoreContext& ctx, NodePair hypothetical) {
  auto eps = ctx.available;
  eps.push_back(hypothetical);
  double best = 0.0;
  for (const auto* r : ctx.routes) best = std::max(best, rcomp(*r, eps));
  return best;
}

// alpha * IB + gamma * OL + delta * BR.
inline double score(const SwapCandidate& c, const ScoreContext& ctx, const ScoringParams& p) {
  const SimTime age = c.age_new();
  if (age >= ctx.cutoff_age) throw AgeExceeded();
  const double d = desirability(ctx, c.result());
  const double remaining = (ctx.cutoff_age - age).to_seconds();
  const double ib = std::min(d / remaining, d * 1e6);

  double ol = 0.0;
  for (const auto& pt : ctx.partners) {
    if (pt.b == c.i || pt.b == c.j) continue;
    // Swapping with b instead keeps the EP on the other side of m.
    for (const auto* r : ctx.routes) {
      auto pos = [&](NodeId n) { return std::find(r->begin(), r->end(), n) - r->begin(); };
      const auto pb = pos(pt.b), pm = pos(c.m);
      if (pb == static_cast<long>(r->size()) || pm == static_cast<long>(r->size())) continue;
      const NodeId a = pb < pm ? c.j : c.i;
      ol += desirability(ctx, normalized(a, pt.b)) * pt.lambda;
      break;
    }
  }
  const double br = p.beta1 * ctx.waiting_load + p.beta2 * ctx.mem_load;
  return p.alpha * ib + p.gamma * ol + p.delta * br;
}

namespace detail {

inline auto tie_key(const SwapCandidate& c) {
  const auto r = c.result();
  return std::make_tuple(r.first, r.second, std::min(c.left, c.right), std::max(c.left, c.right));
}

}  // namespace detail

// Picks among the candidates by policy. `scores` must be parallel to `cands`
// for Scoring; FixedTree and Connectionless callers pre-filter the list to
// the prescribed candidates, so any candidate left is acceptable.
inline std::optional<std::size_t> choose_swap(PolicyKind policy, const std::vector<SwapCandidate>& cands,
                                              const std::vector<double>& scores = {}) {
  std::optional<std::size_t> best;
  auto better = [&](std::size_t a, std::size_t b) {
    // true if a ranks strictly above b
    const auto& x = cands[a];
    const auto& y = cands[b];
    switch (policy) {
      case PolicyKind::OldestFirst:
        if (x.age_new() != y.age_new()) return x.age_new() > y.age_new();
        break;
      case PolicyKind::YoungestFirst:
        if (x.age_new() != y.age_new()) return x.age_new() < y.age_new();
        break;
      case PolicyKind::LongestHop:
        if (x.hop_span != y.hop_span) return x.hop_span > y.hop_span;
        break;
      case PolicyKind::ShortestHop:
        if (x.hop_span != y.hop_span) return x.hop_span < y.hop_span;
        break;
      case PolicyKind::Scoring:
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        break;
      default:
        break;
    }
    return detail::tie_key(x) < detail::tie_key(y);
  };
  for (std::size_t k = 0; k < cands.size(); ++k) {
    if (policy == PolicyKind::Scoring && !(scores.at(k) > 0.0)) continue;
    if (!best || better(k, *best)) best = k;
  }
  return best;
}

}  // namespace qnetsim
