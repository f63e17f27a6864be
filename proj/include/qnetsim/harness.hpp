#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetsim/network_sim.hpp"
#include "qnetsim/params.hpp"
#include "qnetsim/topology.hpp"
#include "qnetsim/workload.hpp"

namespace qnetsim {

struct Scenario {
  std::string name = "default";
  SimConfig sim;
  WorkloadSpec workload;
  std::optional<nlohmann::json> graph;       // fixed graph instead of a Waxman draw per seed
  std::optional<std::vector<Edr>> requests;  // fixed workload instead of a draw per seed
  int seeds = 20;
  std::uint64_t base_seed = 1;

  std::vector<std::uint64_t> seed_list() const {
    std::vector<std::uint64_t> s;
    for (int i = 0; i < seeds; ++i) s.push_back(base_seed + static_cast<std::uint64_t>(i));
    return s;
  }
};

namespace detail {

inline double secs(SimTime t) { return t.to_seconds(); }

inline SimTime read_secs(const nlohmann::json& j, const char* key, SimTime def, std::vector<std::string>& errs) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number() || j.at(key).get<double>() < 0) {
    errs.push_back(std::string(key) + ": expected a non-negative number of seconds");
    return def;
  }
  return SimTime::from_seconds(j.at(key).get<double>());
}

inline void check_keys(const nlohmann::json& j, const std::vector<std::string>& known, const std::string& where,
                       std::vector<std::string>& errs) {
  if (!j.is_object()) {
    errs.push_back(where + ": expected an object");
    return;
  }
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) errs.push_back(where + ": unknown key '" + k + "'");
  }
}

}  // namespace detail

inline nlohmann::json scenario_to_json(const Scenario& s) {
  using detail::secs;
  const auto& c = s.sim;
  nlohmann::json j;
  j["name"] = s.name;
  j["params"] = c.params;
  j["policy"] = to_string(c.policy);
  j["gem_mode"] = to_string(c.gem);
  nlohmann::json sc{{"alpha", c.scoring.alpha},
                    {"gamma", c.scoring.gamma},
                    {"delta", c.scoring.delta},
                    {"beta1", c.scoring.beta1},
                    {"beta2", c.scoring.beta2}};
  if (c.scoring.cutoff_age) sc["cutoff_age_s"] = secs(*c.scoring.cutoff_age);
  j["scoring"] = sc;
  j["rho"] = c.rho;
  j["l_target_factor"] = c.l_target_factor;
  j["corridor"] = c.corridor;
  j["decision_retry_s"] = secs(c.decision_retry);
  j["monitor_period_s"] = secs(c.monitor_period);
  nlohmann::json pairs = nlohmann::json::array();
  for (auto [a, b] : c.predist.pairs) pairs.push_back({a, b});
  j["predist"] = {{"model", to_string(c.predist.model)},
                  {"superlinks", c.predist.superlinks},
                  {"stock_target", c.predist.stock_target},
                  {"replenish_threshold", c.predist.replenish_threshold},
                  {"max_age_s", secs(c.predist.max_age)},
                  {"min_fidelity", c.predist.min_fidelity},
                  {"warmup_s", secs(c.predist.warmup)},
                  {"pairs", pairs}};
  const auto& m = c.monitor;
  j["monitor"] = {{"delta_r", m.delta_r}, {"delta_f", m.delta_f}, {"eta_r", m.eta_r},
                  {"eta_f", m.eta_f},     {"n_min", m.n_min},     {"t_min_s", secs(m.t_min)},
                  {"cooldown_s", secs(m.cooldown)}, {"t_susp_s", secs(m.t_susp)}};
  if (s.requests) {
    j["requests"] = workload_to_json(*s.requests)["requests"];
  } else {
    j["workload"] = {{"requests", s.workload.requests},
                     {"interval_s", secs(s.workload.interval)},
                     {"offset_s", secs(s.workload.offset)},
                     {"min_hops", s.workload.min_hops},
                     {"requirement", requirement_to_json(s.workload.requirement)}};
  }
  if (s.graph) j["graph"] = *s.graph;
  j["seeds"] = s.seeds;
  j["base_seed"] = s.base_seed;
  return j;
}

// Missing keys keep their defaults; unknown keys are errors.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  using detail::read_secs;
  std::vector<std::string> errs;
  Scenario s;
  detail::check_keys(j,
                     {"name", "params", "policy", "gem_mode", "scoring", "rho", "l_target_factor", "corridor",
                      "decision_retry_s", "monitor_period_s", "predist", "monitor", "workload", "requests", "graph",
                      "seeds", "base_seed"},
                     "scenario", errs);
  auto& c = s.sim;
  try {
    if (j.contains("name")) s.name = j.at("name").get<std::string>();
    if (j.contains("params")) c.params = j.at("params").get<SimParams>();
    if (j.contains("policy")) c.policy = policy_from_string(j.at("policy").get<std::string>());
    if (j.contains("gem_mode")) c.gem = gem_sync_from_string(j.at("gem_mode").get<std::string>());
    if (j.contains("rho")) c.rho = j.at("rho").get<double>();
    if (j.contains("l_target_factor")) c.l_target_factor = j.at("l_target_factor").get<double>();
    if (j.contains("corridor")) c.corridor = j.at("corridor").get<double>();
    c.decision_retry = read_secs(j, "decision_retry_s", c.decision_retry, errs);
    c.monitor_period = read_secs(j, "monitor_period_s", c.monitor_period, errs);
    if (j.contains("scoring")) {
      const auto& sc = j.at("scoring");
      detail::check_keys(sc, {"alpha", "gamma", "delta", "beta1", "beta2", "cutoff_age_s"}, "scoring", errs);
      c.scoring.alpha = sc.value("alpha", c.scoring.alpha);
      c.scoring.gamma = sc.value("gamma", c.scoring.gamma);
      c.scoring.delta = sc.value("delta", c.scoring.delta);
      c.scoring.beta1 = sc.value("beta1", c.scoring.beta1);
      c.scoring.beta2 = sc.value("beta2", c.scoring.beta2);
      if (sc.contains("cutoff_age_s")) c.scoring.cutoff_age = read_secs(sc, "cutoff_age_s", SimTime::zero(), errs);
    }
    if (j.contains("predist")) {
      const auto& p = j.at("predist");
      detail::check_keys(p,
                         {"model", "superlinks", "stock_target", "replenish_threshold", "max_age_s", "min_fidelity",
                          "warmup_s", "pairs"},
                         "predist", errs);
      auto& d = c.predist;
      if (p.contains("model")) d.model = predist_from_string(p.at("model").get<std::string>());
      d.superlinks = p.value("superlinks", d.superlinks);
      d.stock_target = p.value("stock_target", d.stock_target);
      d.replenish_threshold = p.value("replenish_threshold", d.replenish_threshold);
      d.max_age = read_secs(p, "max_age_s", d.max_age, errs);
      d.min_fidelity = p.value("min_fidelity", d.min_fidelity);
      d.warmup = read_secs(p, "warmup_s", d.warmup, errs);
      if (p.contains("pairs")) {
        for (const auto& pr : p.at("pairs")) d.pairs.push_back(normalized(pr.at(0).get<NodeId>(), pr.at(1).get<NodeId>()));
      }
    }
    if (j.contains("monitor")) {
      const auto& m = j.at("monitor");
      detail::check_keys(m, {"delta_r", "delta_f", "eta_r", "eta_f", "n_min", "t_min_s", "cooldown_s", "t_susp_s"},
                         "monitor", errs);
      auto& mc = c.monitor;
      mc.delta_r = m.value("delta_r", mc.delta_r);
      mc.delta_f = m.value("delta_f", mc.delta_f);
      mc.eta_r = m.value("eta_r", mc.eta_r);
      mc.eta_f = m.value("eta_f", mc.eta_f);
      mc.n_min = m.value("n_min", mc.n_min);
      mc.t_min = read_secs(m, "t_min_s", mc.t_min, errs);
      mc.cooldown = read_secs(m, "cooldown_s", mc.cooldown, errs);
      mc.t_susp = read_secs(m, "t_susp_s", mc.t_susp, errs);
    }
    if (j.contains("workload")) {
      const auto& w = j.at("workload");
      detail::check_keys(w, {"requests", "interval_s", "offset_s", "min_hops", "requirement"}, "workload", errs);
      s.workload.requests = w.value("requests", s.workload.requests);
      s.workload.interval = read_secs(w, "interval_s", s.workload.interval, errs);
      s.workload.offset = read_secs(w, "offset_s", s.workload.offset, errs);
      s.workload.min_hops = w.value("min_hops", s.workload.min_hops);
      if (w.contains("requirement")) s.workload.requirement = requirement_from_json(w.at("requirement"));
    }
    if (j.contains("requests")) s.requests = workload_from_json(nlohmann::json{{"requests", j.at("requests")}});
    if (j.contains("graph")) s.graph = j.at("graph");
    s.seeds = j.value("seeds", s.seeds);
    s.base_seed = j.value("base_seed", s.base_seed);
  } catch (const ConfigInvalid& e) {
    errs.push_back(e.what());
  } catch (const std::exception& e) {
    errs.push_back(e.what());
  }
  if (s.seeds < 1) errs.push_back("seeds: must be >= 1");
  if (errs.empty()) {
    try {
      c.params.validate();
      c.predist.validate();
      c.monitor.validate();
    } catch (const std::exception& e) {
      errs.push_back(e.what());
    }
  }
  if (!errs.empty()) throw ConfigInvalid(std::move(errs));
  return s;
}

struct SeedRun {
  std::uint64_t seed = 0;
  SimMetrics metrics;
};

// Topology, workload and simulation share the seed, so runs of different
// policies on one seed see the same graph and requests.
inline NetworkGraph scenario_graph(const Scenario& s, std::uint64_t seed) {
  if (s.graph) return graph_from_json(*s.graph, s.sim.params);
  return generate_network(s.sim.params, seed);
}

inline std::vector<Edr> scenario_requests(const Scenario& s, const NetworkGraph& g, std::uint64_t seed) {
  if (s.requests) return *s.requests;
  WorkloadSpec w = s.workload;
  w.seed = seed;
  return generate_workload(w, g);
}

inline SeedRun run_seed(const Scenario& s, std::uint64_t seed, TraceSink sink = {}, int trace_level = 0) {
  const NetworkGraph g = scenario_graph(s, seed);
  const auto w = scenario_requests(s, g, seed);
  SimConfig cfg = s.sim;
  cfg.seed = seed;
  return SeedRun{seed, simulate(g, w, cfg, std::move(sink), trace_level)};
}

inline std::vector<SeedRun> run_scenario(const Scenario& s) {
  std::vector<SeedRun> out;
  for (auto seed : s.seed_list()) out.push_back(run_seed(s, seed));
  return out;
}

// --- statistics and CSV ------------------------------------------------------

struct Stat {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for one value
  int n = 0;
};

inline Stat summarize(const std::vector<double>& xs) {
  Stat s;
  s.n = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / s.n;
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / (s.n - 1));
  }
  return s;
}

struct MetricColumn {
  const char* name;
  double (*get)(const SimMetrics&);
};

inline const std::vector<MetricColumn>& metric_columns() {
  static const std::vector<MetricColumn> cols{
      {"rate", [](const SimMetrics& m) { return m.rate; }},
      {"latency_s", [](const SimMetrics& m) { return m.mean_latency_s; }},
      {"fidelity", [](const SimMetrics& m) { return m.mean_fidelity; }},
      {"delivered", [](const SimMetrics& m) { return static_cast<double>(m.delivered); }},
      {"link_eps", [](const SimMetrics& m) { return static_cast<double>(m.link_eps); }},
      {"swaps_attempted", [](const SimMetrics& m) { return static_cast<double>(m.swaps_attempted); }},
      {"swaps_succeeded", [](const SimMetrics& m) { return static_cast<double>(m.swaps_succeeded); }},
      {"lock_conflicts", [](const SimMetrics& m) { return static_cast<double>(m.lock_conflicts); }},
      {"discards", [](const SimMetrics& m) { return static_cast<double>(m.discards()); }},
      {"predist_used", [](const SimMetrics& m) { return static_cast<double>(m.predist_used); }},
      {"gem_messages", [](const SimMetrics& m) { return static_cast<double>(m.gem_messages); }},
      {"classical_messages", [](const SimMetrics& m) { return static_cast<double>(m.classical_messages); }},
      {"events", [](const SimMetrics& m) { return static_cast<double>(m.events); }},
  };
  return cols;
}

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// One row per seed.
inline void write_runs_csv(std::ostream& os, const Scenario& s, const std::vector<SeedRun>& runs) {
  os << "scenario,policy,gem_mode,predist,seed";
  for (const auto& c : metric_columns()) os << ',' << c.name;
  os << '\n';
  for (const auto& r : runs) {
    os << s.name << ',' << to_string(s.sim.policy) << ',' << to_string(s.sim.gem) << ','
       << to_string(s.sim.predist.model) << ',' << r.seed;
    for (const auto& c : metric_columns()) os << ',' << fmt_num(c.get(r.metrics));
    os << '\n';
  }
}

// Per-request rows, useful for latency calibration.
inline void write_requests_csv(std::ostream& os, const std::vector<SeedRun>& runs) {
  os << "seed,request,src,dst,hops,status,delivered,mean_latency_s,estimate_s,mean_fidelity\n";
  for (const auto& r : runs) {
    for (const auto& q : r.metrics.requests) {
      os << r.seed << ',' << q.id << ',' << q.src << ',' << q.dst << ',' << q.hops << ',' << to_string(q.status) << ','
         << q.delivered << ',' << fmt_num(q.mean_latency_s()) << ',' << fmt_num(q.estimate_s) << ','
         << fmt_num(q.mean_fidelity()) << '\n';
    }
  }
}

// --- sweeps --------------------------------------------------------------------

enum class SweepAxis { Nodes, Density, SwapProb, Policy };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Nodes: return "nodes";
    case SweepAxis::Density: return "density";
    case SweepAxis::SwapProb: return "swap_prob";
    case SweepAxis::Policy: return "policy";
  }
  return "?";
}

inline SweepAxis sweep_axis_from_string(const std::string& s) {
  for (auto a : {SweepAxis::Nodes, SweepAxis::Density, SweepAxis::SwapProb, SweepAxis::Policy}) {
    if (s == to_string(a)) return a;
  }
  throw std::invalid_argument("unknown sweep axis: " + s);
}

inline std::vector<double> default_axis_values(SweepAxis a) {
  switch (a) {
    case SweepAxis::Nodes: return {50, 100, 150, 200};
    case SweepAxis::Density: return {0.05, 0.1, 0.15, 0.2};
    case SweepAxis::SwapProb: return {0.2, 0.4, 0.6};
    case SweepAxis::Policy: return {0};
  }
  return {};
}

struct SweepRow {
  std::string axis;
  double value = 0.0;
  std::string policy;
  std::string gem_mode;
  std::vector<Stat> stats;  // parallel to metric_columns()
  int seeds = 0;
};

inline Scenario with_axis(Scenario s, SweepAxis a, double v) {
  switch (a) {
    case SweepAxis::Nodes: s.sim.params.nodes = static_cast<int>(v); break;
    case SweepAxis::Density: s.sim.params.density = v; break;
    case SweepAxis::SwapProb: s.sim.params.set_swap_prob(v); break;
    case SweepAxis::Policy: break;
  }
  return s;
}

struct PolicyVariant {
  PolicyKind policy;
  GemSync gem = GemSync::Distributed;
};

inline std::string variant_label(const PolicyVariant& v) {
  return v.gem == GemSync::Centralized ? std::string("centralized") : std::string(to_string(v.policy));
}

inline SweepRow aggregate(const std::string& axis, double value, const Scenario& s, const std::vector<SeedRun>& runs) {
  SweepRow row;
  row.axis = axis;
  row.value = value;
  row.policy = to_string(s.sim.policy);
  row.gem_mode = to_string(s.sim.gem);
  row.seeds = static_cast<int>(runs.size());
  for (const auto& c : metric_columns()) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(c.get(r.metrics));
    row.stats.push_back(summarize(xs));
  }
  return row;
}

using SweepProgress = std::function<void(const SweepRow&)>;

// Rows ordered by (axis value, variant order); every variant of an axis point
// runs on the same seeds.
inline std::vector<SweepRow> sweep(const Scenario& base, SweepAxis axis, const std::vector<double>& values,
                                   const std::vector<PolicyVariant>& variants, SweepProgress progress = {}) {
  std::vector<SweepRow> rows;
  for (double v : values) {
    for (const auto& pv : variants) {
      Scenario s = with_axis(base, axis, v);
      s.sim.policy = pv.policy;
      s.sim.gem = pv.gem;
      rows.push_back(aggregate(to_string(axis), v, s, run_scenario(s)));
      if (progress) progress(rows.back());
    }
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "axis,value,policy,gem_mode";
  for (const auto& c : metric_columns()) os << ',' << c.name << "_mean," << c.name << "_sd";
  os << ",seeds\n";
  for (const auto& r : rows) {
    os << r.axis << ',' << fmt_num(r.value) << ',' << r.policy << ',' << r.gem_mode;
    for (const auto& st : r.stats) os << ',' << fmt_num(st.mean) << ',' << fmt_num(st.sd);
    os << ',' << r.seeds << '\n';
  }
}

}  // namespace qnetsim
