#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "veltair/io.h"

namespace veltair {

struct CalibrationSpec {
  std::size_t samples = 10000;
  std::uint64_t seed = 7;

  bool operator==(const CalibrationSpec&) const = default;
};

struct CompileSection {
  CompileOptions options;
  CalibrationSpec calibration;
  std::map<std::string, double> qos_overrides;  // model_id -> deadline, seconds

  bool operator==(const CompileSection&) const = default;
};

struct WorkloadSection {
  /// Empty means every model of the universe at rate 1.
  std::vector<WorkloadEntry> entries;
  double duration = 2.0;
  MixMode mix = MixMode::inverse_qos;
  /// Rates are rescaled to this total when set.
  std::optional<double> total_rate = 400.0;

  bool operator==(const WorkloadSection&) const = default;
};

struct SimSection {
  ConflictModel conflict;
  Nanos sample_period = 1'000'000;
  double warmup_fraction = 0.05;
  bool record_counters = true;

  bool operator==(const SimSection&) const = default;
};

struct RunSection {
  std::string strategy = "veltair_full";
  std::uint64_t seed = 1;

  bool operator==(const RunSection&) const = default;
};

struct SweepSection {
  std::vector<std::string> strategies = {"model_wise", "layer_wise", "fixed_block(6)",
                                         "veltair_as", "veltair_ac", "veltair_full"};
  /// Explicit grid; when empty, lo..hi in coarse steps of `search`.
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  QpsSearch search{100.0, 1500.0, 100.0, 20.0, 0.95};
  /// Rate at which efficiency is compared across strategies.
  double efficiency_lambda = 400.0;
  /// Rates at which conflict rates are compared across strategies.
  std::vector<double> conflict_lambdas = {200.0, 400.0, 600.0, 800.0, 1000.0};

  bool operator==(const SweepSection&) const = default;
};

/// Everything a command may read. Built from defaults, then a config file,
/// then flags.
struct ResolvedConfig {
  UniverseConfig universe;
  CompileSection compile;
  WorkloadSection workload;
  SimSection sim;
  RunSection run;
  SweepSection sweep;
  /// --cores: machine size for gen-profiles and compile; must match the
  /// variants file for run and sweep.
  std::optional<int> cores;

  bool operator==(const ResolvedConfig&) const = default;
};

Json to_json(const ResolvedConfig& config);
ResolvedConfig config_from_json(const Json& j);
inline void from_json(const Json& j, ResolvedConfig& c) { c = config_from_json(j); }

/// Defaults overlaid with the JSON object in `path` (if any). Unknown keys,
/// bad types and unreadable files are ConfigErrors.
ResolvedConfig load_config(const std::optional<std::string>& path);

/// Throws ConfigError naming the first bad field.
void validate(const ResolvedConfig& config);

/// The lambdas a sweep evaluates.
std::vector<double> sweep_lambdas(const SweepSection& sweep);

// ---------------------------------------------------------------------------
// Files

Json profiles_to_json(const Profiles& profiles);
Profiles profiles_from_json(const Json& j);
Profiles read_profiles(const std::string& path);

struct VariantsFile {
  UniverseConfig universe;
  CompileSection compile;
  std::string profiles_digest;
  LinearProxy proxy;
  Universe models;

  bool operator==(const VariantsFile&) const = default;
};

Json variants_to_json(const VariantsFile& variants);
VariantsFile variants_from_json(const Json& j);
VariantsFile read_variants(const std::string& path);

// ---------------------------------------------------------------------------
// Commands. Each writes `out` and returns what it wrote.

Profiles cmd_gen_profiles(const ResolvedConfig& config, const std::string& out);

/// Compiles the profiles file, applying --versions, QoS overrides and --cores,
/// and fits the interference proxy on a calibration trace.
VariantsFile cmd_compile(const std::string& profiles_path, const ResolvedConfig& config, const std::string& out);

/// Workload the run and sweep commands simulate.
WorkloadSpec resolve_workload(const WorkloadSection& section, const Universe& universe, std::uint64_t seed);
SimOptions resolve_sim_options(const SimSection& section, const VariantsFile& variants);

Json results_to_json(const SimResult& result, const VariantsFile& variants, const std::string& variants_digest);

/// Exit status 3 territory: throws SimulationError on broken invariants.
SimResult cmd_run(const std::string& variants_path, const ResolvedConfig& config, const std::string& out);

/// Writes the CSV to `out` and its metadata (config, seeds, qps95 brackets)
/// to `out` + ".json".
SweepResult cmd_sweep(const std::string& variants_path, const ResolvedConfig& config, const std::string& out);

}  // namespace veltair
