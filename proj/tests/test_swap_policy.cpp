#include <gtest/gtest.h>

#include <cmath>

#include "qnetsim/rng.hpp"
#include "qnetsim/swap_policy.hpp"

using namespace qnetsim;

namespace {

SwapCandidate cand(NodeId m, NodeId i, NodeId j, double age_l_s, double age_r_s, EpId l = 1, EpId r = 2) {
  SwapCandidate c;
  c.m = m;
  c.i = i;
  c.j = j;
  c.left = l;
  c.right = r;
  c.age_left = SimTime::from_seconds(age_l_s);
  c.age_right = SimTime::from_seconds(age_r_s);
  return c;
}

}  // namespace

TEST(Rcomp, Examples) {
  const std::vector<NodeId> route{10, 11, 12, 13};
  EXPECT_DOUBLE_EQ(rcomp(route, {}), 0.0);
  EXPECT_DOUBLE_EQ(rcomp(route, {{10, 13}}), 1.0);
  EXPECT_DOUBLE_EQ(rcomp(route, {{10, 11}, {11, 13}}), 1.0);
  EXPECT_DOUBLE_EQ(rcomp(route, {{10, 11}}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(rcomp(route, {{12, 11}}), 1.0 / 3.0);          // orientation does not matter
  EXPECT_DOUBLE_EQ(rcomp(route, {{10, 12}, {11, 13}}), 1.0);      // overlaps count once
  EXPECT_DOUBLE_EQ(rcomp(route, {{10, 99}, {11, 11}}), 0.0);      // off-route and degenerate
}

TEST(Score, LoneCompletingSwap) {
  const std::vector<NodeId> route{0, 1, 2};
  ScoreContext ctx;
  ctx.routes.push_back(&route);
  ctx.available = {{0, 1}, {1, 2}};
  ctx.cutoff_age = SimTime::seconds(2);
  ScoringParams p;
  const auto c = cand(1, 0, 2, 0.25, 0.5);
  EXPECT_NEAR(score(c, ctx, p), p.alpha / 1.5, 1e-12);
}

TEST(Score, WorkedFourNodeExample) {
  // route a-b-c-d, EPs ab, bc, cd available, swap at b giving ac
  const std::vector<NodeId> route{0, 1, 2, 3};
  ScoreContext ctx;
  ctx.routes.push_back(&route);
  ctx.available = {{0, 1}, {1, 2}, {2, 3}};
  ctx.cutoff_age = SimTime::seconds(2);
  ScoringParams p;
  p.alpha = 1.0;
  p.gamma = -0.5;
  p.delta = 0.0;
  const auto c = cand(1, 0, 2, 0.1, 0.1);
  EXPECT_DOUBLE_EQ(desirability(ctx, c.result()), 1.0);
  EXPECT_NEAR(score(c, ctx, p), 1.0 / 1.9, 1e-12);
  EXPECT_NEAR(score(c, ctx, p), 0.526, 5e-4);
}

TEST(Score, ImmediacyCappedNearCutoff) {
  const std::vector<NodeId> route{0, 1, 2};
  ScoreContext ctx;
  ctx.routes.push_back(&route);
  ctx.cutoff_age = SimTime::seconds(1);
  ScoringParams p;
  p.delta = 0.0;
  auto c = cand(1, 0, 2, 0.0, 0.0);
  c.age_right = SimTime::seconds(1) - SimTime::micros(1);
  // D = 1: 1/(1 us) = 1e6 per second, which is the cap itself
  EXPECT_NEAR(score(c, ctx, p), 1e6, 1e-3);
  c.age_right = SimTime::seconds(1);
  EXPECT_THROW(score(c, ctx, p), AgeExceeded);
}

TEST(Score, OpportunityLossUsesOtherPartners) {
  // route 0-1-2-3, swap at 2 of (1,2)+(2,3); plan also pairs 2 with 0
  const std::vector<NodeId> route{0, 1, 2, 3};
  ScoreContext ctx;
  ctx.routes.push_back(&route);
  ctx.available = {{1, 2}, {2, 3}};
  ctx.partners.push_back({0, 4.0});
  ctx.cutoff_age = SimTime::seconds(2);
  ScoringParams p;
  p.delta = 0.0;
  const auto c = cand(2, 1, 3, 0.0, 0.0);
  // swapping with 0 instead keeps (2,3) and yields (0,3): completes the route
  const double ib = desirability(ctx, {1, 3}) / 2.0;
  const double ol = desirability(ctx, {0, 3}) * 4.0;
  EXPECT_DOUBLE_EQ(desirability(ctx, {1, 3}), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(desirability(ctx, {0, 3}), 1.0);
  EXPECT_NEAR(score(c, ctx, p), p.alpha * ib + p.gamma * ol, 1e-12);
}

TEST(Score, BufferPressure) {
  const std::vector<NodeId> route{0, 1, 2};
  ScoreContext ctx;
  ctx.routes.push_back(&route);
  ctx.cutoff_age = SimTime::seconds(1);
  ctx.waiting_load = 3;
  ctx.mem_load = 0.6;
  ScoringParams p;
  const auto c = cand(1, 0, 2, 0.5, 0.0);
  EXPECT_NEAR(score(c, ctx, p), p.alpha * 2.0 + p.delta * (p.beta1 * 3 + p.beta2 * 0.6), 1e-12);
}

TEST(ChooseSwap, Definitions) {
  std::vector<SwapCandidate> one{cand(1, 0, 2, 0.1, 0.1)};
  for (auto k : {PolicyKind::OldestFirst, PolicyKind::YoungestFirst, PolicyKind::LongestHop, PolicyKind::ShortestHop,
                 PolicyKind::SwapAsap}) {
    EXPECT_EQ(choose_swap(k, one), 0u);
  }
  std::vector<SwapCandidate> two{cand(1, 0, 2, 0.1, 0.1, 1, 2), cand(1, 0, 3, 0.5, 0.2, 3, 4)};
  two[0].hop_span = 3;
  two[1].hop_span = 2;
  EXPECT_EQ(choose_swap(PolicyKind::OldestFirst, two), 1u);
  EXPECT_EQ(choose_swap(PolicyKind::YoungestFirst, two), 0u);
  EXPECT_EQ(choose_swap(PolicyKind::LongestHop, two), 0u);
  EXPECT_EQ(choose_swap(PolicyKind::ShortestHop, two), 1u);
  EXPECT_EQ(choose_swap(PolicyKind::Scoring, two, {0.3, 0.7}), 1u);
  EXPECT_FALSE(choose_swap(PolicyKind::Scoring, two, {0.0, -1.0}).has_value());
  EXPECT_FALSE(choose_swap(PolicyKind::OldestFirst, {}).has_value());
}

TEST(ChooseSwap, TiesByEndpointsThenIds) {
  std::vector<SwapCandidate> c{cand(5, 2, 9, 0.1, 0.1, 7, 8), cand(5, 1, 9, 0.1, 0.1, 9, 10),
                               cand(5, 1, 9, 0.1, 0.1, 3, 4)};
  EXPECT_EQ(choose_swap(PolicyKind::OldestFirst, c), 2u);
  EXPECT_EQ(choose_swap(PolicyKind::Scoring, c, {1.0, 1.0, 1.0}), 2u);
}

// Scaling alpha, gamma and delta together never changes the chosen swap.
TEST(ChooseSwap, ArgmaxInvariantUnderWeightScaling) {
  RngStream rng(5, 0, RngPurpose::Test);
  const std::vector<NodeId> route{0, 1, 2, 3, 4, 5};
  for (int trial = 0; trial < 300; ++trial) {
    ScoreContext ctx;
    ctx.routes.push_back(&route);
    ctx.cutoff_age = SimTime::seconds(1);
    for (int k = 0; k < 3; ++k) {
      const auto a = static_cast<NodeId>(rng.uniform_index(6));
      const auto b = static_cast<NodeId>(rng.uniform_index(6));
      if (a != b) ctx.available.push_back(normalized(a, b));
    }
    if (rng.uniform01() < 0.5) ctx.partners.push_back({0, 1 + 10 * rng.uniform01()});
    ctx.mem_load = rng.uniform01();
    std::vector<SwapCandidate> cands;
    for (int k = 0; k < 4; ++k) {
      const NodeId m = 2;
      const auto i = static_cast<NodeId>(rng.uniform_index(2));
      const auto j = static_cast<NodeId>(3 + rng.uniform_index(3));
      cands.push_back(cand(m, i, j, 0.9 * rng.uniform01(), 0.9 * rng.uniform01(), 2 * k + 1, 2 * k + 2));
    }
    ScoringParams p;
    ScoringParams q = p;
    const double f = 0.1 + 10 * rng.uniform01();
    q.alpha *= f;
    q.gamma *= f;
    q.delta *= f;
    std::vector<double> sp, sq;
    for (const auto& c : cands) {
      ctx.waiting_load = static_cast<int>(c.i + c.j) % 4;
      sp.push_back(score(c, ctx, p));
      sq.push_back(score(c, ctx, q));
    }
    EXPECT_EQ(choose_swap(PolicyKind::Scoring, cands, sp), choose_swap(PolicyKind::Scoring, cands, sq)) << trial;
  }
}

TEST(Discard, Cutoffs) {
  DiscardPolicy d{SimTime::seconds(2), 0.7, true};
  EXPECT_EQ(d.cutoff(0), SimTime::seconds(2));
  EXPECT_NEAR(d.cutoff(3).to_seconds(), 0.686, 1e-6);
  EXPECT_TRUE(d.expired(SimTime::seconds(2) + SimTime::micros(1), 0));
  EXPECT_FALSE(d.expired(SimTime::seconds(2), 0));
  for (int depth = 0; depth < 6; ++depth) EXPECT_FALSE(d.expired(SimTime::zero(), depth));
  for (int depth = 1; depth < 6; ++depth) EXPECT_LT(d.cutoff(depth), d.cutoff(depth - 1));
  DiscardPolicy flat{SimTime::seconds(2), 0.7, false};
  EXPECT_EQ(flat.cutoff(3), SimTime::seconds(2));
}

TEST(Discard, LowerRhoNeverKeepsMore) {
  for (double rho : {0.3, 0.5, 0.7, 0.9}) {
    DiscardPolicy lo{SimTime::seconds(1), rho, true}, hi{SimTime::seconds(1), rho + 0.05, true};
    for (int depth = 0; depth < 8; ++depth) EXPECT_LE(lo.cutoff(depth), hi.cutoff(depth));
  }
}

TEST(Policy, NamesRoundTrip) {
  for (auto k : {PolicyKind::OldestFirst, PolicyKind::YoungestFirst, PolicyKind::LongestHop, PolicyKind::ShortestHop,
                 PolicyKind::Scoring, PolicyKind::FixedTree, PolicyKind::SwapAsap, PolicyKind::Connectionless}) {
    EXPECT_EQ(policy_from_string(to_string(k)), k);
  }
  EXPECT_THROW(policy_from_string("bogus"), std::invalid_argument);
}
