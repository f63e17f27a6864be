#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qnetsim/rng.hpp"
#include "qnetsim/sim_time.hpp"
#include "qnetsim/topology.hpp"
#include "qnetsim/types.hpp"

namespace qnetsim {

struct LinkGenTask {
  LinkId link = kNoLink;
  RequestId request = kNoRequest;
  double target_rate = 1.0;  // EPs/s, also the WRR weight
  int purify_rounds = 0;
  bool active = true;
  bool low_priority = false;  // served only when no regular task is active
};

// Smooth weighted round-robin over the tasks sharing one link. Each pick adds
// every eligible weight to its running credit, takes the largest credit and
// charges it the total, which keeps every task within one assignment of its
// proportional share at all times.
class LinkScheduler {
 public:
  void add(const LinkGenTask& t) {
    if (!(t.target_rate > 0.0)) throw std::invalid_argument("LinkGenTask: target_rate must be > 0");
    tasks_.push_back(t);
    credit_.push_back(0.0);
  }

  void remove(RequestId r) {
    for (std::size_t i = 0; i < tasks_.size();) {
      if (tasks_[i].request == r) {
        tasks_.erase(tasks_.begin() + static_cast<std::ptrdiff_t>(i));
        credit_.erase(credit_.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        ++i;
      }
    }
  }

  void set_active(RequestId r, bool on) {
    for (auto& t : tasks_) {
      if (t.request == r) t.active = on;
    }
  }

  bool has_regular() const {
    return std::any_of(tasks_.begin(), tasks_.end(), [](const LinkGenTask& t) { return t.active && !t.low_priority; });
  }
  bool has_active() const {
    return std::any_of(tasks_.begin(), tasks_.end(), [](const LinkGenTask& t) { return t.active; });
  }
  bool has_task(RequestId r) const {
    return std::any_of(tasks_.begin(), tasks_.end(), [&](const LinkGenTask& t) { return t.request == r; });
  }

  // Index of the task the next heralded EP goes to, or nullopt when idle.
  std::optional<std::size_t> pick() {
    const bool regular = has_regular();
    double total = 0.0;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (!eligible(i, regular)) continue;
      credit_[i] += tasks_[i].target_rate;
      total += tasks_[i].target_rate;
      if (!best || credit_[i] > credit_[*best]) best = i;
    }
    if (best) credit_[*best] -= total;
    return best;
  }

  const std::vector<LinkGenTask>& tasks() const { return tasks_; }
  const LinkGenTask& task(std::size_t i) const { return tasks_.at(i); }

 private:
  bool eligible(std::size_t i, bool regular) const {
    const auto& t = tasks_[i];
    return t.active && (!regular || !t.low_priority);
  }

  std::vector<LinkGenTask> tasks_;
  std::vector<double> credit_;
};

// One generation attempt on a link.
inline bool attempt_tick(const Link& l, RngStream& rng) { return rng.bernoulli(l.p_link); }

// Attempt index of the next success counted from the next attempt (>= 1).
// Equivalent in distribution to calling attempt_tick until it succeeds.
inline std::int64_t attempts_until_success(const Link& l, RngStream& rng) { return rng.geometric_trials(l.p_link); }

}  // namespace qnetsim
