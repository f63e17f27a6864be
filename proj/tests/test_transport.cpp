#include <gtest/gtest.h>

#include "qnetsim/transport.hpp"
#include "test_util.hpp"

using namespace qnetsim;

namespace {

MonitorConfig cfg10() {
  MonitorConfig c;
  c.rate_threshold = 10.0;
  c.fidelity_threshold = 0.8;
  return c;
}

using testutil::samples;

MonitorEval eval_at(MonitorState& s, const MonitorConfig& c, double rate, double f, double now_s) {
  s.log = samples(rate, f, now_s);
  return monitor_step(s, c, SimTime::from_seconds(now_s));
}

}  // namespace

TEST(Monitor, GatedUntilEnoughSamples) {
  const auto c = cfg10();
  MonitorState s;
  s.log = samples(10.0, 0.8, 10.0);
  s.log.resize(c.n_min - 1);
  EXPECT_FALSE(monitor_step(s, c, SimTime::seconds(10)).evaluated);
  // enough samples but the log spans less than T_min
  s.log = samples(100.0, 0.8, 1.0);
  EXPECT_FALSE(monitor_step(s, c, SimTime::seconds(1)).evaluated);
}

TEST(Monitor, InsideBandResetsCounter) {
  const auto c = cfg10();
  MonitorState s;
  s.c = 2;
  // r = T (1 - delta_r / 2)
  const auto ev = eval_at(s, c, 10.0 * (1 - c.delta_r / 2), 0.8, 10.0);
  ASSERT_TRUE(ev.evaluated);
  EXPECT_NEAR(ev.rate, 9.5, 1e-9);
  EXPECT_FALSE(ev.action.has_value());
  EXPECT_EQ(s.c, 0);
}

// Exhaustive branch table for the escalation ladder.
TEST(Monitor, EscalationLadder) {
  const auto c = cfg10();
  MonitorState s;
  const std::vector<ActionKind> want{ActionKind::AdjustRate, ActionKind::AdjustRate, ActionKind::Suspend,
                                     ActionKind::Replan, ActionKind::Terminate, ActionKind::Terminate};
  double t = 10.0;
  for (std::size_t k = 0; k < want.size(); ++k, t += 2.5) {
    const auto ev = eval_at(s, c, 5.0, 0.8, t);
    ASSERT_TRUE(ev.evaluated) << k;
    ASSERT_TRUE(ev.action.has_value()) << k;
    EXPECT_EQ(ev.action->kind, want[k]) << k;
    EXPECT_EQ(s.c, static_cast<int>(k) + 1);
  }
  MonitorState s2;
  const auto first = eval_at(s2, c, 5.0, 0.8, 10.0);
  EXPECT_EQ(*first.action, (CorrectiveAction{ActionKind::AdjustRate, +c.eta_r}));
  for (int k = 0; k < 2; ++k) eval_at(s2, c, 5.0, 0.8, 12.5 + 2.5 * k);
  EXPECT_EQ(s2.c, 3);
}

TEST(Monitor, SuspendCarriesDuration) {
  const auto c = cfg10();
  MonitorState s;
  s.c = 2;
  const auto ev = eval_at(s, c, 5.0, 0.8, 10.0);
  EXPECT_EQ(*ev.action, (CorrectiveAction{ActionKind::Suspend, 0.0, c.t_susp}));
}

TEST(Monitor, AdjustDirections) {
  const auto c = cfg10();
  struct Row {
    double r, f;
    CorrectiveAction a;
  };
  const std::vector<Row> rows{
      {5.0, 0.8, {ActionKind::AdjustRate, +c.eta_r}},
      {20.0, 0.8, {ActionKind::AdjustRate, -c.eta_r}},
      {10.0, 0.6, {ActionKind::AdjustFidelity, +c.eta_f}},
      {10.0, 0.95, {ActionKind::AdjustFidelity, -c.eta_f}},
      {5.0, 0.6, {ActionKind::AdjustRate, +c.eta_r}},  // rate is looked at first
  };
  for (const auto& row : rows) {
    MonitorState s;
    const auto ev = eval_at(s, c, row.r, row.f, 10.0);
    ASSERT_TRUE(ev.action.has_value());
    EXPECT_EQ(*ev.action, row.a) << row.r << " " << row.f;
  }
}

TEST(Monitor, CooldownBetweenActions) {
  const auto c = cfg10();
  MonitorState s;
  ASSERT_TRUE(eval_at(s, c, 5.0, 0.8, 10.0).action.has_value());
  EXPECT_FALSE(eval_at(s, c, 5.0, 0.8, 11.9).evaluated);
  EXPECT_TRUE(eval_at(s, c, 5.0, 0.8, 12.0).evaluated);
}

TEST(Monitor, LiteralZeroBranch) {
  auto c = cfg10();
  c.literal_zero_branch = true;
  MonitorState s;
  EXPECT_EQ(eval_at(s, c, 5.0, 0.8, 10.0).action->kind, ActionKind::Replan);
  EXPECT_EQ(eval_at(s, c, 5.0, 0.8, 12.5).action->kind, ActionKind::AdjustRate);
}

TEST(Monitor, ConfigValidation) {
  auto c = cfg10();
  c.delta_r = 1.0;
  EXPECT_THROW(c.validate(), ConfigInvalid);
  c = cfg10();
  c.fidelity_threshold = 0.2;
  EXPECT_THROW(c.validate(), ConfigInvalid);
  EXPECT_NO_THROW(cfg10().validate());
}

TEST(DualThreshold, Rule) {
  EXPECT_NEAR(*dual_threshold_adjust(13.1, 10.0, 5.0), 9.0, 1e-12);
  EXPECT_FALSE(dual_threshold_adjust(13.0, 10.0, 5.0).has_value());
  EXPECT_FALSE(dual_threshold_adjust(5.0, 10.0, 5.0).has_value());
  EXPECT_THROW(dual_threshold_adjust(1.0, 0.0, 0.0), std::invalid_argument);
}

TEST(DualThreshold, GeometricDownToFloor) {
  double t = 10.0;
  std::vector<double> seq;
  while (auto n = dual_threshold_adjust(1e9, t, 5.0)) {
    t = *n;
    seq.push_back(t);
  }
  // 10 * 0.9^k while above 5, then the floor
  ASSERT_EQ(seq.size(), 7u);
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) EXPECT_NEAR(seq[k], 10.0 * std::pow(0.9, k + 1), 1e-12);
  EXPECT_DOUBLE_EQ(seq.back(), 5.0);
}

TEST(Predist, OneTimeNeverReplenishes) {
  PredistConfig c;
  c.model = PredistModel::OneTime;
  std::vector<PredistPairState> st(1);
  auto d = predist_controller_step(c, st, true);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_TRUE(d[0].generate);
  st[0].stock = 10;
  d = predist_controller_step(c, st, true);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_FALSE(d[0].generate);
  st[0].stock = 7;  // three consumed
  EXPECT_TRUE(predist_controller_step(c, st, true).empty());
  EXPECT_TRUE(predist_controller_step(c, st, false).empty());
  EXPECT_EQ(st[0].stock, 7);
}

TEST(Predist, OneTimeStopsAtFirstArrival) {
  PredistConfig c;
  c.model = PredistModel::OneTime;
  std::vector<PredistPairState> st(1);
  predist_controller_step(c, st, true);
  st[0].stock = 4;
  const auto d = predist_controller_step(c, st, false);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_FALSE(d[0].generate);
  EXPECT_TRUE(predist_controller_step(c, st, false).empty());
}

TEST(Predist, ContinuousHysteresis) {
  PredistConfig c;
  c.model = PredistModel::Continuous;
  c.stock_target = 10;
  c.replenish_threshold = 5;
  std::vector<PredistPairState> st(2);
  st[0].stock = 5;
  st[1].stock = 4;
  auto d = predist_controller_step(c, st, false);
  ASSERT_EQ(d.size(), 1u);  // the pair at the threshold is left alone
  EXPECT_EQ(d[0].pair_index, 1u);
  EXPECT_TRUE(d[0].generate);
  EXPECT_TRUE(d[0].low_priority);
  for (int s = 5; s < 10; ++s) {
    st[1].stock = s;
    EXPECT_TRUE(predist_controller_step(c, st, false).empty()) << s;
  }
  st[1].stock = 10;
  d = predist_controller_step(c, st, false);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_FALSE(d[0].generate);
  for (int s = 9; s >= 5; --s) {
    st[1].stock = s;
    EXPECT_TRUE(predist_controller_step(c, st, false).empty()) << s;
  }
}

TEST(Predist, NoneNeverGenerates) {
  PredistConfig c;
  std::vector<PredistPairState> st(3);
  EXPECT_TRUE(predist_controller_step(c, st, true).empty());
}

TEST(Predist, ConfigValidation) {
  PredistConfig c;
  c.replenish_threshold = 10;
  EXPECT_THROW(c.validate(), ConfigInvalid);
  EXPECT_EQ(predist_from_string("once"), PredistModel::OneTime);
  EXPECT_THROW(predist_from_string("sometimes"), std::invalid_argument);
}
