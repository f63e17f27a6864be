// qnetsim command line: plan, run, sweep, validate.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qnetsim/qnetsim.hpp"

using namespace qnetsim;

namespace {

struct Common {
  std::string config;
  int seeds = 0;
  long long base_seed = -1;
  std::string policy;
  std::string gem_mode;
  std::string predist;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "scenario JSON")->check(CLI::ExistingFile);
  app->add_option("--seeds", c.seeds, "number of seeds (overrides the scenario)");
  app->add_option("--base-seed", c.base_seed, "first seed");
  app->add_option("--policy", c.policy, "oldest|youngest|longest|shortest|scoring|fixed|asap|connectionless");
  app->add_option("--gem-mode", c.gem_mode, "distributed|centralized");
  app->add_option("--predist", c.predist, "none|once|continuous");
  app->add_option("--out", c.out, "output path");
}

Scenario load(const Common& c) {
  Scenario s;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    s = scenario_from_json(nlohmann::json::parse(in));
  }
  if (c.seeds > 0) s.seeds = c.seeds;
  if (c.base_seed >= 0) s.base_seed = static_cast<std::uint64_t>(c.base_seed);
  if (!c.policy.empty()) s.sim.policy = policy_from_string(c.policy);
  if (!c.gem_mode.empty()) s.sim.gem = gem_sync_from_string(c.gem_mode);
  if (!c.predist.empty()) s.sim.predist.model = predist_from_string(c.predist);
  return s;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

std::string stem(const std::string& path) {
  const auto dot = path.rfind('.');
  const auto slash = path.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

void write_sidecar(const std::string& out, const Scenario& s) {
  auto f = open_out(stem(out) + ".config.json");
  f << scenario_to_json(s).dump(2) << '\n';
}

std::vector<PolicyVariant> parse_variants(const std::string& list) {
  std::vector<PolicyVariant> v;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    // the centralized ablation runs the oldest-first policy against a single GEM holder
    if (tok == "centralized") {
      v.push_back({PolicyKind::OldestFirst, GemSync::Centralized});
    } else {
      v.push_back({policy_from_string(tok), GemSync::Distributed});
    }
  }
  return v;
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> v;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) v.push_back(std::stod(tok));
  }
  return v;
}

int cmd_plan(const Common& c, long long seed, int src, int dst, const std::string& graph_out) {
  Scenario s = load(c);
  const auto sd = seed >= 0 ? static_cast<std::uint64_t>(seed) : s.base_seed;
  const NetworkGraph g = scenario_graph(s, sd);
  nlohmann::json out;
  if (src >= 0 && dst >= 0) {
    out = plan_to_json(optimal_tree(g, src, dst, s.sim.params, nullptr, 0));
  } else {
    std::vector<PlanRequest> reqs;
    for (const auto& e : scenario_requests(s, g, sd)) {
      PlanRequest r{e.id, e.src, e.dst, required_fidelity(e.requirement)};
      reqs.push_back(r);
    }
    const auto batch = plan_batch_iterative(g, reqs, s.sim.params);
    out["plans"] = nlohmann::json::array();
    for (const auto& p : batch.plans) out["plans"].push_back(plan_to_json(p));
    out["rejected"] = nlohmann::json::array();
    for (const auto& r : batch.rejected) out["rejected"].push_back({{"request", r.id}, {"reason", r.reason}});
  }
  if (!graph_out.empty()) open_out(graph_out) << graph_to_json(g).dump(2) << '\n';
  if (c.out.empty()) {
    std::cout << out.dump(2) << '\n';
  } else {
    open_out(c.out) << out.dump(2) << '\n';
  }
  return 0;
}

int cmd_run(const Common& c, const std::string& trace_path) {
  Scenario s = load(c);
  const int level = trace_level_from_env();
  std::ofstream trace_file;
  std::ostream* trace_os = nullptr;
  if (level > 0) {
    if (!trace_path.empty()) {
      trace_file = open_out(trace_path);
      trace_os = &trace_file;
    } else {
      trace_os = &std::cerr;
    }
  }
  std::vector<SeedRun> runs;
  for (auto seed : s.seed_list()) {
    TraceSink sink;
    if (trace_os) sink = jsonl_sink(*trace_os);
    runs.push_back(run_seed(s, seed, sink, level));
    const auto& m = runs.back().metrics;
    std::fprintf(stderr, "seed %llu: rate %.3f EP/s, latency %.4f s, fidelity %.4f\n",
                 static_cast<unsigned long long>(seed), m.rate, m.mean_latency_s, m.mean_fidelity);
  }
  const std::string out = c.out.empty() ? "runs.csv" : c.out;
  {
    auto f = open_out(out);
    write_runs_csv(f, s, runs);
  }
  {
    auto f = open_out(stem(out) + ".requests.csv");
    write_requests_csv(f, runs);
  }
  write_sidecar(out, s);
  const auto row = aggregate("run", 0, s, runs);
  std::printf("%s policy=%s gem=%s predist=%s seeds=%d rate=%.3f±%.3f latency=%.4f fidelity=%.4f\n", s.name.c_str(),
              to_string(s.sim.policy), to_string(s.sim.gem), to_string(s.sim.predist.model), row.seeds,
              row.stats[0].mean, row.stats[0].sd, row.stats[1].mean, row.stats[2].mean);
  return 0;
}

int cmd_sweep(const Common& c, const std::string& axis_s, const std::string& values_s, const std::string& policies) {
  Scenario s = load(c);
  const auto axis = sweep_axis_from_string(axis_s);
  const auto values = values_s.empty() ? default_axis_values(axis) : parse_values(values_s);
  auto variants = parse_variants(policies);
  if (!c.policy.empty() && policies.empty()) variants = {{s.sim.policy, s.sim.gem}};
  const auto rows = sweep(s, axis, values, variants, [](const SweepRow& r) {
    std::fprintf(stderr, "%s=%g %s/%s rate %.3f±%.3f\n", r.axis.c_str(), r.value, r.policy.c_str(),
                 r.gem_mode.c_str(), r.stats[0].mean, r.stats[0].sd);
  });
  const std::string out = c.out.empty() ? "sweep.csv" : c.out;
  {
    auto f = open_out(out);
    write_sweep_csv(f, rows);
  }
  write_sidecar(out, s);
  return 0;
}

int report(const TraceReport& r) {
  std::printf("lines %lld, EPs %lld (ended %lld), swaps %lld, deliveries %lld, max slots %d\n",
              static_cast<long long>(r.lines), static_cast<long long>(r.eps_seen), static_cast<long long>(r.eps_ended),
              static_cast<long long>(r.swaps), static_cast<long long>(r.deliveries), r.max_slot_use);
  for (const auto& e : r.errors) std::printf("violation: %s\n", e.c_str());
  std::printf("%s\n", r.ok() ? "trace OK" : "trace INVALID");
  return r.ok() ? 0 : 1;
}

int cmd_validate(const Common& c, const std::string& trace_path) {
  if (!trace_path.empty()) {
    std::ifstream in(trace_path);
    if (!in) throw std::runtime_error("cannot read " + trace_path);
    return report(validate_trace(in));
  }
  // no trace given: run each seed of the scenario with full tracing and check it
  Scenario s = load(c);
  int rc = 0;
  for (auto seed : s.seed_list()) {
    std::stringstream buf;
    run_seed(s, seed, jsonl_sink(buf), 2);
    std::printf("seed %llu: ", static_cast<unsigned long long>(seed));
    rc |= report(validate_trace(buf));
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qnetsim: quantum network stack simulator"};
  app.require_subcommand(1);
  Common common;

  auto* plan = app.add_subcommand("plan", "plan the workload (or one pair) and print plan JSON");
  add_common(plan, common);
  long long plan_seed = -1;
  int src = -1, dst = -1;
  std::string graph_out;
  plan->add_option("--seed", plan_seed, "graph and workload seed");
  plan->add_option("--src", src);
  plan->add_option("--dst", dst);
  plan->add_option("--graph-out", graph_out, "also write the graph JSON");

  auto* run = app.add_subcommand("run", "run one scenario over its seeds, write per-seed CSV");
  add_common(run, common);
  std::string trace_path;
  run->add_option("--trace", trace_path, "JSON-lines trace file (QNETSIM_LOG sets verbosity)");

  auto* sw = app.add_subcommand("sweep", "sweep one axis, write aggregated CSV");
  add_common(sw, common);
  std::string axis = "policy", values, policies;
  sw->add_option("--axis", axis, "nodes|density|swap_prob|policy");
  sw->add_option("--values", values, "comma-separated axis values");
  sw->add_option("--policies", policies, "comma-separated policies; 'centralized' for the GEM ablation")
      ->default_val("scoring,fixed,connectionless,centralized");

  auto* val = app.add_subcommand("validate", "check trace invariants");
  add_common(val, common);
  std::string val_trace;
  val->add_option("trace", val_trace, "trace file; without it the scenario is run and traced");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*plan) return cmd_plan(common, plan_seed, src, dst, graph_out);
    if (*run) return cmd_run(common, trace_path);
    if (*sw) return cmd_sweep(common, axis, values, policies);
    if (*val) return cmd_validate(common, val_trace);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
