#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetsim/planner.hpp"
#include "qnetsim/sim_time.hpp"
#include "qnetsim/types.hpp"

namespace qnetsim {

struct MonitorConfig {
  double rate_threshold = 1.0;       // EPs/s
  double fidelity_threshold = 0.5;
  double delta_r = 0.1;
  double delta_f = 0.1;
  double eta_r = 0.1;
  double eta_f = 0.1;
  int n_min = 5;
  SimTime t_min = SimTime::seconds(2);
  SimTime cooldown = SimTime::seconds(2);
  SimTime t_susp = SimTime::seconds(5);
  bool literal_zero_branch = false;  // branch on the counter before incrementing

  void validate() const {
    std::vector<std::string> errs;
    if (!(rate_threshold > 0)) errs.push_back("rate_threshold: must be > 0");
    if (!(fidelity_threshold >= 0.25 && fidelity_threshold <= 1)) errs.push_back("fidelity_threshold: must be in [0.25, 1]");
    for (auto [name, v] : {std::pair{"delta_r", delta_r}, {"delta_f", delta_f}, {"eta_r", eta_r}, {"eta_f", eta_f}}) {
      if (!(v > 0 && v < 1)) errs.push_back(std::string(name) + ": must be in (0, 1)");
    }
    if (n_min < 1) errs.push_back("n_min: must be >= 1");
    if (t_min <= SimTime::zero() || cooldown <= SimTime::zero() || t_susp <= SimTime::zero()) {
      errs.push_back("monitor durations must be > 0");
    }
    if (!errs.empty()) throw ConfigInvalid(std::move(errs));
  }
};

struct Sample {
  SimTime t;
  double fidelity = 0.0;
};

struct MonitorState {
  int c = 0;
  SimTime t_last = SimTime::zero();
  bool acted = false;  // t_last only gates once an action has been taken
  std::vector<Sample> log;
};

enum class ActionKind { Continue, Replan, AdjustRate, AdjustFidelity, Suspend, Terminate };

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Continue: return "continue";
    case ActionKind::Replan: return "replan";
    case ActionKind::AdjustRate: return "adjust_rate";
    case ActionKind::AdjustFidelity: return "adjust_fidelity";
    case ActionKind::Suspend: return "suspend";
    case ActionKind::Terminate: return "terminate";
  }
  return "?";
}

struct CorrectiveAction {
  ActionKind kind = ActionKind::Continue;
  double fraction = 0.0;            // adjust_*: signed step
  SimTime duration = SimTime::zero();  // suspend

  bool operator==(const CorrectiveAction&) const = default;
};

struct MonitorEval {
  bool evaluated = false;  // false when gated
  double rate = 0.0;
  double fidelity = 0.0;
  std::optional<CorrectiveAction> action;
};

// Window averages over the samples within the last T_min.
inline std::pair<double, double> window_averages(const MonitorState& s, const MonitorConfig& cfg, SimTime now) {
  const SimTime from = now > cfg.t_min ? now - cfg.t_min : SimTime::zero();
  int n = 0;
  double fsum = 0.0;
  for (auto it = s.log.rbegin(); it != s.log.rend() && it->t >= from; ++it) {
    ++n;
    fsum += it->fidelity;
  }
  const double r = static_cast<double>(n) / cfg.t_min.to_seconds();
  return {r, n ? fsum / n : 0.0};
}

// One evaluation of the execution monitor.
inline MonitorEval monitor_step(MonitorState& s, const MonitorConfig& cfg, SimTime now) {
  MonitorEval ev;
  const auto n = static_cast<int>(s.log.size());
  if (n < cfg.n_min) return ev;
  const SimTime span = s.log.back().t - s.log.front().t;
  if (span < cfg.t_min) return ev;
  if (s.acted && now - s.t_last < cfg.cooldown) return ev;
  ev.evaluated = true;
  auto [r, f] = window_averages(s, cfg, now);
  ev.rate = r;
  ev.fidelity = f;
  const double rt = cfg.rate_threshold;
  const double ft = cfg.fidelity_threshold;
  if (std::abs(r - rt) <= cfg.delta_r * rt && std::abs(f - ft) <= cfg.delta_f * ft) {
    s.c = 0;
    return ev;
  }
  const int before = s.c;
  s.c += 1;
  const int c = cfg.literal_zero_branch ? before : s.c;

  std::optional<CorrectiveAction> a;
  if (c == 0) {
    a = CorrectiveAction{ActionKind::Replan};
  } else if (c == 1 || c == 2) {
    if (r < rt * (1 - cfg.delta_r)) {
      a = CorrectiveAction{ActionKind::AdjustRate, +cfg.eta_r};
    } else if (r > rt * (1 + cfg.delta_r)) {
      a = CorrectiveAction{ActionKind::AdjustRate, -cfg.eta_r};
    } else if (f < ft * (1 - cfg.delta_f)) {
      a = CorrectiveAction{ActionKind::AdjustFidelity, +cfg.eta_f};
    } else if (f > ft * (1 + cfg.delta_f)) {
      a = CorrectiveAction{ActionKind::AdjustFidelity, -cfg.eta_f};
    }
  } else if (c == 3) {
    a = CorrectiveAction{ActionKind::Suspend, 0.0, cfg.t_susp};
  } else if (c == 4) {
    a = CorrectiveAction{ActionKind::Replan};
  } else {
    a = CorrectiveAction{ActionKind::Terminate};
  }
  if (a) {
    s.t_last = now;
    s.acted = true;
  }
  ev.action = a;
  return ev;
}

// Relaxes a threshold that is being beaten by more than 30%, never below
// `floor`.
inline std::optional<double> dual_threshold_adjust(double observed, double threshold, double floor) {
  if (!(threshold > 0)) throw std::invalid_argument("dual_threshold_adjust: threshold must be > 0");
  if (!(observed > 1.3 * threshold)) return std::nullopt;
  const double next = std::max(0.9 * threshold, floor);
  if (next >= threshold) return std::nullopt;
  return next;
}

enum class PredistModel { None, OneTime, Continuous };

inline const char* to_string(PredistModel m) {
  switch (m) {
    case PredistModel::None: return "none";
    case PredistModel::OneTime: return "once";
    case PredistModel::Continuous: return "continuous";
  }
  return "?";
}

inline PredistModel predist_from_string(const std::string& s) {
  if (s == "none") return PredistModel::None;
  if (s == "once" || s == "onetime" || s == "one_time") return PredistModel::OneTime;
  if (s == "continuous") return PredistModel::Continuous;
  throw std::invalid_argument("unknown predistribution model: " + s);
}

struct PredistConfig {
  PredistModel model = PredistModel::None;
  std::vector<NodePair> pairs;        // empty: chosen with select_superlinks
  int superlinks = 5;
  int stock_target = 10;
  int replenish_threshold = 5;
  SimTime max_age = SimTime::seconds(20);
  double min_fidelity = 0.5;
  SimTime warmup = SimTime::seconds(5);  // one-time generation window before the first arrival

  void validate() const {
    std::vector<std::string> errs;
    if (stock_target < 1) errs.push_back("predist.stock_target: must be >= 1");
    if (!(replenish_threshold < stock_target)) errs.push_back("predist.replenish_threshold: must be < stock_target");
    if (replenish_threshold < 0) errs.push_back("predist.replenish_threshold: must be >= 0");
    if (superlinks < 0) errs.push_back("predist.superlinks: must be >= 0");
    if (max_age <= SimTime::zero()) errs.push_back("predist.max_age: must be > 0");
    if (!errs.empty()) throw ConfigInvalid(std::move(errs));
  }
};

struct PredistDirective {
  std::size_t pair_index = 0;
  bool generate = false;    // turn generation on (true) or off (false)
  bool low_priority = false;
};

struct PredistPairState {
  int stock = 0;            // Available predistributed EPs for the pair
  bool generating = false;
  bool filled_once = false; // one-time model reached its target
};

// Decides, for each super-link pair, whether its generation should run.
// OneTime: runs before the first request arrival until the target is reached,
// then never again. Continuous: switches on below the replenish threshold and
// off at the target, at low priority.
inline std::vector<PredistDirective> predist_controller_step(const PredistConfig& cfg,
                                                             std::vector<PredistPairState>& pairs,
                                                             bool before_first_arrival) {
  std::vector<PredistDirective> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& st = pairs[i];
    bool want = st.generating;
    switch (cfg.model) {
      case PredistModel::None:
        want = false;
        break;
      case PredistModel::OneTime:
        if (st.stock >= cfg.stock_target) st.filled_once = true;
        want = before_first_arrival && !st.filled_once;
        break;
      case PredistModel::Continuous:
        if (st.stock < cfg.replenish_threshold) want = true;
        if (st.stock >= cfg.stock_target) want = false;
        break;
    }
    if (want != st.generating) {
      st.generating = want;
      out.push_back({i, want, cfg.model == PredistModel::Continuous});
    }
  }
  return out;
}

}  // namespace qnetsim
