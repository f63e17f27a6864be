#pragma once

#include <algorithm>
#include <cmath>

#include "qnetsim/sim_time.hpp"

namespace qnetsim {

inline double fidelity_from_werner(double w) { return (3.0 * w + 1.0) / 4.0; }
inline double werner_from_fidelity(double f) { return (4.0 * f - 1.0) / 3.0; }

// Werner-state bookkeeping. `born_at` is the instant the parameter w refers
// to; decay from there is applied lazily by whoever reads the state.
struct WernerState {
  double w = 1.0;
  SimTime born_at;

  double fidelity() const { return fidelity_from_werner(w); }
};

struct NoiseParams {
  double depolar_rate = 0.01;  // per second, per memory
  double dephase_rate = 1000;  // recorded only; Werner states have no dephasing axis
};

// Both halves of the pair sit in memory and depolarize independently.
inline WernerState decay(WernerState s, SimTime dt, const NoiseParams& np) {
  if (dt <= SimTime::zero()) return s;
  s.w *= std::exp(-2.0 * np.depolar_rate * dt.to_seconds());
  s.born_at += dt;
  return s;
}

inline WernerState decay_to(WernerState s, SimTime t, const NoiseParams& np) {
  return t > s.born_at ? decay(s, t - s.born_at, np) : s;
}

inline WernerState swap_fidelity(WernerState a, WernerState b) {
  return WernerState{a.w * b.w, std::max(a.born_at, b.born_at)};
}

struct PurifyOutcome {
  double success_prob = 0.0;
  WernerState out;
};

// BBPSSW recurrence on two Werner pairs, output twirled back to Werner form.
inline PurifyOutcome purify(WernerState a, WernerState b) {
  const double f1 = a.fidelity();
  const double f2 = b.fidelity();
  const double g1 = 1.0 - f1;
  const double g2 = 1.0 - f2;
  const double p = f1 * f2 + f1 * g2 / 3.0 + g1 * f2 / 3.0 + 5.0 * g1 * g2 / 9.0;
  const double f_out = (f1 * f2 + g1 * g2 / 9.0) / p;
  PurifyOutcome r;
  r.success_prob = p;
  r.out.w = std::clamp(werner_from_fidelity(f_out), 0.0, 1.0);
  r.out.born_at = std::max(a.born_at, b.born_at);
  return r;
}

}  // namespace qnetsim
