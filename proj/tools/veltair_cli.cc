// veltair: gen-profiles | compile | run | sweep
//
// Exit status: 0 ok, 2 configuration error, 3 simulation invariant broken,
// 1 anything else.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "veltair/cli.h"

using namespace veltair;

namespace {

struct Flags {
  std::optional<std::string> config;
  std::string out;
  std::optional<int> cores;
  // gen-profiles / compile
  std::optional<std::uint64_t> universe_seed;
  std::string profiles;
  std::optional<std::size_t> versions;
  std::vector<std::string> qos;
  // run / sweep
  std::string variants;
  std::vector<std::string> strategies;
  std::vector<double> qps;
  std::vector<std::uint64_t> seeds;
  std::optional<double> duration;
  std::optional<std::string> mix;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file (flags override it)");
  cmd->add_option("--out", f.out, "Output path")->required();
  cmd->add_option("--cores", f.cores, "Machine cores (default 64)");
}

void add_workload(CLI::App* cmd, Flags& f) {
  cmd->add_option("--variants", f.variants, "Variants file from `compile`")->required();
  cmd->add_option("--duration", f.duration, "Simulated seconds");
  cmd->add_option("--mix", f.mix, "explicit or inverse-qos");
}

ResolvedConfig resolve(const Flags& f) {
  auto c = load_config(f.config);
  if (f.cores) c.cores = *f.cores;
  if (f.versions) c.compile.options.versions = *f.versions;
  for (const auto& q : f.qos) {
    const auto eq = q.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--qos expects MODEL=SECONDS, got '" + q + "'");
    try {
      std::size_t pos = 0;
      const double v = std::stod(q.substr(eq + 1), &pos);
      if (pos != q.size() - eq - 1) throw std::invalid_argument(q);
      c.compile.qos_overrides[q.substr(0, eq)] = v;
    } catch (const std::logic_error&) {
      throw ConfigError("--qos expects MODEL=SECONDS, got '" + q + "'");
    }
  }
  if (f.duration) c.workload.duration = *f.duration;
  if (f.mix) c.workload.mix = parse_mix_mode(*f.mix);
  return c;
}

void echo(const ResolvedConfig& c) { std::cout << "config " << to_json(c).dump() << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-version compilation and layer-block scheduling simulator"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen-profiles", "Generate the synthetic schedule-search profiles");
  add_common(gen, f);
  gen->add_option("--seed", f.universe_seed, "Universe seed");

  auto* comp = app.add_subcommand("compile", "Select multi-version variants per layer");
  add_common(comp, f);
  comp->add_option("--profiles", f.profiles, "Profiles file")->required();
  comp->add_option("--versions", f.versions, "Maximum versions per layer (default 5)");
  comp->add_option("--qos", f.qos, "Deadline override MODEL=SECONDS (repeatable)");

  auto* runc = app.add_subcommand("run", "Simulate one workload under one strategy");
  add_common(runc, f);
  add_workload(runc, f);
  runc->add_option("--strategy", f.strategies, "Scheduling strategy")->expected(1);
  runc->add_option("--qps", f.qps, "Total arrival rate, queries/s")->expected(1);
  runc->add_option("--seed", f.seeds, "Run seed")->expected(1);

  auto* sweep = app.add_subcommand("sweep", "Strategies x rates x seeds to CSV");
  add_common(sweep, f);
  add_workload(sweep, f);
  sweep->add_option("--strategy", f.strategies, "Strategies (repeatable)");
  sweep->add_option("--qps", f.qps, "Total rates (repeatable)");
  sweep->add_option("--seed", f.seeds, "Seeds (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    auto c = resolve(f);
    if (gen->parsed()) {
      if (f.universe_seed) c.universe.seed = *f.universe_seed;
      echo(c);
      const auto p = cmd_gen_profiles(c, f.out);
      std::size_t layers = 0;
      for (const auto& m : p.models) layers += m.layers.size();
      std::cout << "wrote " << f.out << ": " << p.models.size() << " models, " << layers << " layers\n";
    } else if (comp->parsed()) {
      echo(c);
      const auto v = cmd_compile(f.profiles, c, f.out);
      std::cout << "wrote " << f.out << ": proxy r2 " << v.proxy.r2 << "\n";
    } else if (runc->parsed()) {
      if (!f.strategies.empty()) c.run.strategy = f.strategies.front();
      if (!f.qps.empty()) c.workload.total_rate = f.qps.front();
      if (!f.seeds.empty()) c.run.seed = f.seeds.front();
      echo(c);
      const auto r = cmd_run(f.variants, c, f.out);
      std::cout << "wrote " << f.out << ": " << r.queries.size() << " queries";
      if (!measured_queries(r).empty()) std::cout << ", satisfaction " << qos_satisfaction(r);
      std::cout << "\n";
    } else if (sweep->parsed()) {
      if (!f.strategies.empty()) c.sweep.strategies = f.strategies;
      if (!f.qps.empty()) c.sweep.lambdas = f.qps;
      if (!f.seeds.empty()) c.sweep.seeds = f.seeds;
      echo(c);
      const auto s = cmd_sweep(f.variants, c, f.out);
      for (const auto& sum : s.summaries) {
        std::cout << sum.strategy << " qps95 " << sum.qps.lambda_star << " [" << sum.qps.low << ", "
                  << sum.qps.high << ")" << (sum.qps.unsaturated ? " unsaturated" : "") << "\n";
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SimulationError& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
