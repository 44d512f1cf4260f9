#include "veltair/cli.h"

#include <cmath>
#include <sstream>

namespace veltair {

namespace {

Json compile_section_json(const CompileSection& c) {
  Json overrides = Json::object();
  for (const auto& [id, q] : c.qos_overrides) overrides[id] = q;
  return Json{{"options", c.options},
              {"calibration", Json{{"samples", c.calibration.samples}, {"seed", c.calibration.seed}}},
              {"qos_overrides", overrides}};
}

CompileSection compile_section_from(const Json& j) {
  CompileSection c;
  j.at("options").get_to(c.options);
  j.at("calibration").at("samples").get_to(c.calibration.samples);
  j.at("calibration").at("seed").get_to(c.calibration.seed);
  for (const auto& [id, q] : j.at("qos_overrides").items()) c.qos_overrides[id] = q.get<double>();
  return c;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const ResolvedConfig& c) {
  return Json{
      {"universe", c.universe},
      {"compile", compile_section_json(c.compile)},
      {"workload",
       Json{{"entries", c.workload.entries},
            {"duration", c.workload.duration},
            {"mix", c.workload.mix},
            {"total_rate", optional_json(c.workload.total_rate)}}},
      {"sim",
       Json{{"conflict", c.sim.conflict},
            {"sample_period", to_seconds(c.sim.sample_period)},
            {"warmup_fraction", c.sim.warmup_fraction},
            {"record_counters", c.sim.record_counters}}},
      {"run", Json{{"strategy", c.run.strategy}, {"seed", c.run.seed}}},
      {"sweep",
       Json{{"strategies", c.sweep.strategies},
            {"lambdas", c.sweep.lambdas},
            {"seeds", c.sweep.seeds},
            {"search",
             Json{{"lo", c.sweep.search.lo},
                  {"hi", c.sweep.search.hi},
                  {"coarse_step", c.sweep.search.coarse_step},
                  {"fine_step", c.sweep.search.fine_step},
                  {"target", c.sweep.search.target}}},
            {"efficiency_lambda", c.sweep.efficiency_lambda},
            {"conflict_lambdas", c.sweep.conflict_lambdas}}},
      {"cores", c.cores ? Json(*c.cores) : Json(nullptr)}};
}

ResolvedConfig config_from_json(const Json& j) {
  ResolvedConfig c;
  j.at("universe").get_to(c.universe);
  c.compile = compile_section_from(j.at("compile"));
  const auto& w = j.at("workload");
  w.at("entries").get_to(c.workload.entries);
  w.at("duration").get_to(c.workload.duration);
  w.at("mix").get_to(c.workload.mix);
  const auto& tr = w.at("total_rate");
  c.workload.total_rate = tr.is_null() ? std::nullopt : std::optional<double>(tr.get<double>());
  const auto& s = j.at("sim");
  s.at("conflict").get_to(c.sim.conflict);
  c.sim.sample_period = from_seconds(s.at("sample_period").get<double>());
  s.at("warmup_fraction").get_to(c.sim.warmup_fraction);
  s.at("record_counters").get_to(c.sim.record_counters);
  j.at("run").at("strategy").get_to(c.run.strategy);
  j.at("run").at("seed").get_to(c.run.seed);
  const auto& sw = j.at("sweep");
  sw.at("strategies").get_to(c.sweep.strategies);
  sw.at("lambdas").get_to(c.sweep.lambdas);
  sw.at("seeds").get_to(c.sweep.seeds);
  const auto& se = sw.at("search");
  se.at("lo").get_to(c.sweep.search.lo);
  se.at("hi").get_to(c.sweep.search.hi);
  se.at("coarse_step").get_to(c.sweep.search.coarse_step);
  se.at("fine_step").get_to(c.sweep.search.fine_step);
  se.at("target").get_to(c.sweep.search.target);
  sw.at("efficiency_lambda").get_to(c.sweep.efficiency_lambda);
  sw.at("conflict_lambdas").get_to(c.sweep.conflict_lambdas);
  const auto& cores = j.at("cores");
  c.cores = cores.is_null() ? std::nullopt : std::optional<int>(cores.get<int>());
  return c;
}

ResolvedConfig load_config(const std::optional<std::string>& path) {
  ResolvedConfig defaults;
  if (!path) return defaults;
  const std::string what = "config '" + *path + "'";
  const Json overlay = parse_json(read_file(*path), what);
  if (!overlay.is_object()) throw ConfigError(what + ": top level must be an object");
  Json merged = to_json(defaults);
  check_known_keys(merged, overlay);
  merged.merge_patch(overlay);
  return decode<ResolvedConfig>(merged, what);
}

void validate(const ResolvedConfig& c) {
  auto u = c.universe;
  if (c.cores) u.machine.total_cores = *c.cores;
  validate_config(u);
  if (c.compile.options.versions < 1) throw ConfigError("compile.options.versions must be >= 1");
  if (!(c.compile.options.keep_ratio > 0.0 && c.compile.options.keep_ratio <= 1.0))
    throw ConfigError("compile.options.keep_ratio must be in (0, 1]");
  if (c.compile.options.probe_cores < 1) throw ConfigError("compile.options.probe_cores must be >= 1");
  if (!(c.compile.options.qos_headroom > 0.0 && c.compile.options.qos_headroom <= 1.0))
    throw ConfigError("compile.options.qos_headroom must be in (0, 1]");
  if (c.compile.calibration.samples < 3) throw ConfigError("compile.calibration.samples must be >= 3");
  for (const auto& [id, q] : c.compile.qos_overrides) {
    if (!(q > 0.0)) throw ConfigError("compile.qos_overrides." + id + " must be positive");
  }
  if (!(c.workload.duration > 0.0)) throw ConfigError("workload.duration must be positive");
  if (c.workload.total_rate && !(*c.workload.total_rate > 0.0))
    throw ConfigError("workload.total_rate must be positive");
  for (const auto& e : c.workload.entries) {
    if (!(e.rate > 0.0)) throw ConfigError("workload.entries rate for '" + e.model_id + "' must be positive");
  }
  if (c.sim.conflict.per_conflict_overhead < 0 || c.sim.conflict.median_overhead < 0)
    throw ConfigError("sim.conflict overheads must be >= 0");
  if (c.sim.conflict.forced_rate && !(*c.sim.conflict.forced_rate >= 0.0 && *c.sim.conflict.forced_rate <= 1.0))
    throw ConfigError("sim.conflict.forced_rate must be in [0, 1]");
  if (c.sim.sample_period <= 0) throw ConfigError("sim.sample_period must be positive");
  if (!(c.sim.warmup_fraction >= 0.0 && c.sim.warmup_fraction < 0.5))
    throw ConfigError("sim.warmup_fraction must be in [0, 0.5)");
  SchedulingStrategy::parse(c.run.strategy);
  for (const auto& s : c.sweep.strategies) SchedulingStrategy::parse(s);
  for (double l : c.sweep.lambdas) {
    if (!(l > 0.0)) throw ConfigError("sweep.lambdas must be positive");
  }
  const auto& se = c.sweep.search;
  if (!(se.lo > 0.0 && se.hi >= se.lo && se.coarse_step > 0.0 && se.fine_step > 0.0))
    throw ConfigError("sweep.search must have 0 < lo <= hi and positive steps");
  if (c.cores && *c.cores < 1) throw ConfigError("cores must be >= 1");
}

std::vector<double> sweep_lambdas(const SweepSection& sweep) {
  if (!sweep.lambdas.empty()) return sweep.lambdas;
  return rate_grid(sweep.search.lo, sweep.search.hi, sweep.search.coarse_step);
}

// ---------------------------------------------------------------------------

Json profiles_to_json(const Profiles& p) {
  return Json{{"schema_version", kSchemaVersion},
              {"kind", "profiles"},
              {"tool", tool_info()},
              {"config", Json{{"universe", p.config}}},
              {"models", p.models}};
}

Profiles profiles_from_json(const Json& j) {
  check_header(j, "profiles", "profiles file");
  Profiles p;
  p.config = decode<UniverseConfig>(j.at("config").at("universe"), "profiles file");
  p.models = decode<std::vector<ModelProfile>>(j.at("models"), "profiles file");
  return p;
}

Profiles read_profiles(const std::string& path) {
  const std::string what = "profiles '" + path + "'";
  const auto j = parse_json(read_file(path), what);
  try {
    return profiles_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

Json variants_to_json(const VariantsFile& v) {
  return Json{{"schema_version", kSchemaVersion},
              {"kind", "variants"},
              {"tool", tool_info()},
              {"config",
               Json{{"universe", v.universe},
                    {"compile", compile_section_json(v.compile)},
                    {"profiles_digest", v.profiles_digest}}},
              {"proxy", v.proxy},
              {"models", v.models}};
}

VariantsFile variants_from_json(const Json& j) {
  check_header(j, "variants", "variants file");
  VariantsFile v;
  const auto& c = j.at("config");
  c.at("universe").get_to(v.universe);
  v.compile = compile_section_from(c.at("compile"));
  c.at("profiles_digest").get_to(v.profiles_digest);
  j.at("proxy").get_to(v.proxy);
  j.at("models").get_to(v.models);
  return v;
}

VariantsFile read_variants(const std::string& path) {
  const std::string what = "variants '" + path + "'";
  const auto j = parse_json(read_file(path), what);
  try {
    return variants_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

Profiles cmd_gen_profiles(const ResolvedConfig& config, const std::string& out) {
  validate(config);
  auto u = config.universe;
  if (config.cores) u.machine.total_cores = *config.cores;
  auto profiles = generate_profiles(u);
  write_file(out, dump(profiles_to_json(profiles)));
  return profiles;
}

VariantsFile cmd_compile(const std::string& profiles_path, const ResolvedConfig& config, const std::string& out) {
  validate(config);
  const std::string text = read_file(profiles_path);
  Profiles profiles;
  try {
    profiles = profiles_from_json(parse_json(text, "profiles '" + profiles_path + "'"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("profiles '" + profiles_path + "': " + e.what());
  }
  if (config.cores) profiles.config.machine.total_cores = *config.cores;
  for (const auto& [id, q] : config.compile.qos_overrides) {
    bool found = false;
    for (auto& m : profiles.models) {
      if (m.model_id == id) {
        m.qos_seconds = q;
        found = true;
      }
    }
    if (!found) throw ConfigError("qos override for unknown model '" + id + "'");
  }

  VariantsFile v;
  v.universe = profiles.config;
  v.compile = config.compile;
  v.profiles_digest = fnv1a_hex(text);
  v.models = compile_universe(profiles, config.compile.options);
  const auto trace = calibration_trace(v.models, v.universe.machine, config.compile.calibration.samples,
                                       config.compile.calibration.seed);
  v.proxy = fit(trace);
  write_file(out, dump(variants_to_json(v)));
  return v;
}

WorkloadSpec resolve_workload(const WorkloadSection& section, const Universe& universe, std::uint64_t seed) {
  WorkloadSpec w;
  w.entries = section.entries;
  if (w.entries.empty()) {
    for (const auto& m : universe) w.entries.push_back({m.adaptive.model_id, 1.0});
  }
  w.duration = section.duration;
  w.mix_mode = section.mix;
  w.rng_seed = seed;
  if (section.total_rate) w = with_total_rate(w, *section.total_rate);
  resolve_rates(w, universe);
  return w;
}

SimOptions resolve_sim_options(const SimSection& section, const VariantsFile& variants) {
  SimOptions o;
  o.machine = variants.universe.machine;
  o.conflict = section.conflict;
  o.proxy = variants.proxy;
  o.sample_period = section.sample_period;
  o.warmup_fraction = section.warmup_fraction;
  o.record_counters = section.record_counters;
  return o;
}

namespace {

VariantsFile load_for_simulation(const std::string& path, const ResolvedConfig& config, std::string& digest) {
  validate(config);
  const std::string text = read_file(path);
  digest = fnv1a_hex(text);
  VariantsFile v;
  try {
    v = variants_from_json(parse_json(text, "variants '" + path + "'"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("variants '" + path + "': " + e.what());
  }
  if (config.cores && *config.cores != v.universe.machine.total_cores) {
    throw ConfigError("--cores " + std::to_string(*config.cores) + " does not match the variants file (" +
                      std::to_string(v.universe.machine.total_cores) + " cores)");
  }
  return v;
}

Json provenance(const VariantsFile& v, const std::string& variants_digest) {
  return Json{{"universe", v.universe},
              {"compile", compile_section_json(v.compile)},
              {"profiles_digest", v.profiles_digest},
              {"variants_digest", variants_digest}};
}

}  // namespace

Json results_to_json(const SimResult& result, const VariantsFile& variants, const std::string& variants_digest) {
  Json metrics = Json::object();
  if (!measured_queries(result).empty()) {
    Universe const& u = variants.models;
    Json per_model = Json::object();
    for (const auto& [id, s] : qos_satisfaction_per_model(result)) per_model[id] = s;
    metrics = Json{{"qos_satisfaction", qos_satisfaction(result)},
                   {"qos_satisfaction_per_model", per_model},
                   {"avg_latency_ms", average_latency(result) * 1e3},
                   {"cpu_usage_efficiency", cpu_usage_efficiency(result, u)},
                   {"conflict_rate", conflict_rate(result)},
                   {"system_load", system_load(result)},
                   {"measured_queries", measured_queries(result).size()}};
  }
  return Json{
      {"schema_version", kSchemaVersion},
      {"kind", "results"},
      {"tool", tool_info()},
      {"config",
       Json{{"strategy", result.strategy},
            {"seed", result.seed},
            {"workload", result.workload},
            {"sim", result.options},
            {"provenance", provenance(variants, variants_digest)}}},
      {"metadata",
       Json{{"warmup_fraction", result.options.warmup_fraction},
            {"measured_window", Json::array({to_seconds(result.window_begin), to_seconds(result.window_end)})},
            {"qos_satisfaction_scope", "pooled over the mix; per model alongside"},
            {"efficiency_definition",
             "sum over executed layers of (layer-optimal cores x latency at those cores with the executed "
             "version and interference) / sum over blocks of held core-seconds"}}},
      {"metrics", metrics},
      {"trace", result}};
}

SimResult cmd_run(const std::string& variants_path, const ResolvedConfig& config, const std::string& out) {
  std::string digest;
  const auto v = load_for_simulation(variants_path, config, digest);
  const auto strategy = SchedulingStrategy::parse(config.run.strategy);
  const auto workload = resolve_workload(config.workload, v.models, config.run.seed);
  const auto result = run(v.models, workload, strategy, resolve_sim_options(config.sim, v), config.run.seed);
  write_file(out, dump(results_to_json(result, v, digest)));
  return result;
}

SweepResult cmd_sweep(const std::string& variants_path, const ResolvedConfig& config, const std::string& out) {
  std::string digest;
  const auto v = load_for_simulation(variants_path, config, digest);
  SweepConfig sc;
  for (const auto& s : config.sweep.strategies) sc.strategies.push_back(SchedulingStrategy::parse(s));
  sc.lambdas = sweep_lambdas(config.sweep);
  sc.seeds = config.sweep.seeds;
  sc.workload = resolve_workload(config.workload, v.models, sc.seeds.empty() ? 0 : sc.seeds.front());
  sc.options = resolve_sim_options(config.sim, v);
  sc.threads = sweep_threads();
  const auto sweep = run_sweep(v.models, sc);

  std::ostringstream csv;
  write_csv(csv, sweep);
  write_file(out, csv.str());

  Json summaries = Json::array();
  for (const auto& s : sweep.summaries) summaries.push_back(Json{{"strategy", s.strategy}, {"qps95", s.qps}});
  Json strategies = Json::array();
  for (const auto& s : sc.strategies) strategies.push_back(s.name());
  Json meta{{"schema_version", kSchemaVersion},
            {"kind", "sweep"},
            {"tool", tool_info()},
            {"config",
             Json{{"strategies", strategies},
                  {"lambdas", sc.lambdas},
                  {"seeds", sc.seeds},
                  {"workload", sc.workload},
                  {"sim", sc.options},
                  {"provenance", provenance(v, digest)}}},
            {"csv_digest", fnv1a_hex(csv.str())},
            {"summaries", summaries}};
  write_file(out + ".json", dump(meta));
  return sweep;
}

}  // namespace veltair
