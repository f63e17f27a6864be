#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetsim/sim_time.hpp"

namespace qnetsim {

// Thrown when a configuration fails validation; carries one message per field.
class ConfigInvalid : public std::invalid_argument {
 public:
  explicit ConfigInvalid(std::vector<std::string> errors)
      : std::invalid_argument(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errs) {
    std::string out = "invalid configuration:";
    for (const auto& e : errs) out += "\n  " + e;
    return out;
  }
  std::vector<std::string> errors_;
};

// Physical and protocol constants of one simulated network.
struct SimParams {
  double swap_prob = 0.4;                           // success of entanglement swapping
  SimTime swap_latency = SimTime::micros(10);       // duration of one swap
  double bsm_prob = 0.4;                            // atomic BSM, tracks swap_prob
  SimTime bsm_latency = SimTime::micros(10);
  double optical_bsm_prob = 0.2;                    // bsm_prob / 2
  SimTime gen_period = SimTime::micros(50);         // atom-photon generation time
  double gen_prob = 0.33;                           // atom-photon generation success
  double attenuation_km = 20.0;
  double depolar_rate = 0.01;                       // 1/s
  double dephase_rate = 1000.0;                     // stored, not used by the Werner model
  double side_km = 100.0;
  int nodes = 100;
  double density = 0.1;
  int memory_slots = 5;
  SimTime duration = SimTime::seconds(100);
  double fiber_speed_km_s = 2e5;
  double link_fidelity = 0.97;                      // fidelity of a freshly heralded link EP
  double waxman_alpha = 0.4;

  // Sets the swapping success probability together with the quantities tied
  // to it: the atomic BSM equals it and the optical BSM is half of it.
  void set_swap_prob(double p) {
    swap_prob = p;
    bsm_prob = p;
    optical_bsm_prob = p / 2.0;
  }

  // Werner parameter of a fresh link EP.
  double link_werner() const { return (4.0 * link_fidelity - 1.0) / 3.0; }

  std::vector<std::string> validation_errors() const {
    std::vector<std::string> errs;
    auto prob = [&](const char* name, double v) {
      if (!(v > 0.0 && v <= 1.0)) errs.push_back(std::string(name) + ": must be in (0, 1], got " + std::to_string(v));
    };
    prob("swap_prob", swap_prob);
    prob("bsm_prob", bsm_prob);
    prob("optical_bsm_prob", optical_bsm_prob);
    prob("gen_prob", gen_prob);
    if (swap_latency < SimTime::zero()) errs.push_back("swap_latency: must be >= 0");
    if (bsm_latency < SimTime::zero()) errs.push_back("bsm_latency: must be >= 0");
    if (gen_period <= SimTime::zero()) errs.push_back("gen_period: must be > 0");
    if (!(attenuation_km > 0.0)) errs.push_back("attenuation_km: must be > 0");
    if (!(depolar_rate >= 0.0)) errs.push_back("depolar_rate: must be >= 0");
    if (!(dephase_rate >= 0.0)) errs.push_back("dephase_rate: must be >= 0");
    if (!(side_km > 0.0)) errs.push_back("side_km: must be > 0");
    if (nodes < 2) errs.push_back("nodes: must be >= 2");
    if (!(density > 0.0 && density <= 1.0)) errs.push_back("density: must be in (0, 1]");
    if (memory_slots < 1) errs.push_back("memory_slots: must be >= 1");
    if (duration <= SimTime::zero()) errs.push_back("duration: must be > 0");
    if (!(fiber_speed_km_s > 0.0)) errs.push_back("fiber_speed_km_s: must be > 0");
    if (!(link_fidelity > 0.25 && link_fidelity <= 1.0)) errs.push_back("link_fidelity: must be in (0.25, 1]");
    if (!(waxman_alpha > 0.0)) errs.push_back("waxman_alpha: must be > 0");
    return errs;
  }

  void validate() const {
    auto errs = validation_errors();
    if (!errs.empty()) throw ConfigInvalid(std::move(errs));
  }
};

inline void to_json(nlohmann::json& j, const SimParams& p) {
  j = nlohmann::json{
      {"swap_prob", p.swap_prob},
      {"swap_latency_us", p.swap_latency.count()},
      {"bsm_prob", p.bsm_prob},
      {"bsm_latency_us", p.bsm_latency.count()},
      {"optical_bsm_prob", p.optical_bsm_prob},
      {"gen_period_us", p.gen_period.count()},
      {"gen_prob", p.gen_prob},
      {"attenuation_km", p.attenuation_km},
      {"depolar_rate", p.depolar_rate},
      {"dephase_rate", p.dephase_rate},
      {"side_km", p.side_km},
      {"nodes", p.nodes},
      {"density", p.density},
      {"memory_slots", p.memory_slots},
      {"duration_s", p.duration.to_seconds()},
      {"fiber_speed_km_s", p.fiber_speed_km_s},
      {"link_fidelity", p.link_fidelity},
      {"waxman_alpha", p.waxman_alpha},
  };
}

// Missing keys keep their defaults. bsm_prob follows swap_prob and
// optical_bsm_prob follows bsm_prob / 2 unless given explicitly.
inline void from_json(const nlohmann::json& j, SimParams& p) {
  std::vector<std::string> errs;
  auto num = [&](const char* key, auto& out) {
    if (!j.contains(key)) return false;
    const auto& v = j.at(key);
    if (!v.is_number()) {
      errs.push_back(std::string(key) + ": expected a number");
      return false;
    }
    out = v.get<std::remove_reference_t<decltype(out)>>();
    return true;
  };
  auto micros = [&](const char* key, SimTime& out) {
    std::int64_t us = 0;
    if (num(key, us)) out = SimTime::micros(us);
  };
  num("swap_prob", p.swap_prob);
  micros("swap_latency_us", p.swap_latency);
  if (!num("bsm_prob", p.bsm_prob)) p.bsm_prob = p.swap_prob;
  if (j.contains("bsm_latency_us")) {
    micros("bsm_latency_us", p.bsm_latency);
  } else {
    p.bsm_latency = p.swap_latency;
  }
  if (!num("optical_bsm_prob", p.optical_bsm_prob)) p.optical_bsm_prob = p.bsm_prob / 2.0;
  micros("gen_period_us", p.gen_period);
  num("gen_prob", p.gen_prob);
  num("attenuation_km", p.attenuation_km);
  num("depolar_rate", p.depolar_rate);
  num("dephase_rate", p.dephase_rate);
  num("side_km", p.side_km);
  num("nodes", p.nodes);
  num("density", p.density);
  num("memory_slots", p.memory_slots);
  double dur = 0.0;
  if (num("duration_s", dur)) {
    if (dur > 0.0) {
      p.duration = SimTime::from_seconds(dur);
    } else {
      errs.push_back("duration_s: must be > 0");
    }
  }
  num("fiber_speed_km_s", p.fiber_speed_km_s);
  num("link_fidelity", p.link_fidelity);
  num("waxman_alpha", p.waxman_alpha);
  if (!errs.empty()) throw ConfigInvalid(std::move(errs));
}

}  // namespace qnetsim
