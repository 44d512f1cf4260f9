#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "veltair/domain.h"
#include "veltair/perfmodel.h"

namespace veltair {

/// Knobs of the synthetic schedule-search emulator. Defaults reproduce the
/// shipped universe.
struct GeneratorParams {
  double kappa = 6.0;  // sensitivity of the largest-tile sample in a layer
  std::int64_t min_block_size = 8;
  std::int64_t max_block_size = 1024;
  std::int64_t max_parallelism = 1024;
  int reference_cores = 64;  // solo_time is measured at this core count
  /// Solo throughput scales as (block_size / max_block_size)^locality_exponent.
  double locality_exponent = 0.05;
  double search_noise_max = 0.15;
  double bandwidth_factor_min = 0.3;  // at max block size
  double bandwidth_factor_max = 0.9;  // at min block size
  /// How far (log2 units) samples may fall inside the parallelism x block-size
  /// capacity boundary. Larger values spread samples over more Pareto levels.
  double frontier_depth = 4.0;

  // Layers belong to stages. A stage body has a demand d in [0, 1]: light
  // bodies (d = 1) run at full throughput but scale poorly, heavy bodies
  // (d = 0) run at `heavy_efficiency` and scale almost linearly. Both
  // quantities are interpolated geometrically in d.
  double heavy_efficiency = 0.04;
  double heavy_serial_fraction = 0.002;
  double light_serial_fraction = 0.8;
  /// Serial fraction at parallelism 1 relative to max parallelism.
  double serial_parallel_span = 2.0;
  /// Stage leaders (the conflict-prone layers) are heavy layers scaled again by this.
  double leader_efficiency = 0.5;
  double leader_op_weight = 0.3;
  /// Op weight multiplier light_op_weight^d (leaders count as d = 0).
  double light_op_weight = 6.0;
  double layer_jitter = 0.1;  // log-normal sigma on per-layer efficiency
  double stage_jitter = 0.05;  // normal sigma on stage demand

  bool operator==(const GeneratorParams&) const = default;
};

/// Where a layer sits in its model.
struct LayerTraits {
  bool conflict_prone = false;  // leads a stage
  double stage_demand = 1.0;    // 1 = light, 0 = heavy

  bool operator==(const LayerTraits&) const = default;
};

/// Layer-level characteristics drawn from a shape seed.
struct LayerShape {
  double capacity_log2 = 13.0;    // log2(block_size * parallelism) upper bound
  double efficiency = 1.0;        // multiplies solo FLOP/s
  double serial_fraction = 0.01;  // at max parallelism
};

LayerShape derive_shape(std::uint64_t layer_shape_seed, const LayerTraits& traits,
                        const GeneratorParams& params = {});

/// One point emitted by the emulated auto-scheduler.
struct ScheduleSample {
  std::int64_t block_size = 1;
  std::int64_t parallelism = 1;
  double search_noise = 0.0;  // [0, search_noise_max]
  double solo_time = 0.0;     // seconds at reference_cores, zero interference
  double solo_flops = 0.0;
  double serial_fraction = 0.0;
  double bandwidth_factor = 1.0;

  bool operator==(const ScheduleSample&) const = default;
};

/// Emulates one auto-scheduler pass over a layer: `n_samples` distinct
/// (block_size, parallelism) points with their predicted solo latency.
/// Deterministic in all arguments. Throws std::invalid_argument on n_samples == 0.
std::vector<ScheduleSample> generate_samples(std::uint64_t layer_shape_seed, double op_count,
                                             std::size_t n_samples, std::uint64_t rng_seed,
                                             const GeneratorParams& params = {},
                                             const MachineSpec& machine = {},
                                             const LayerTraits& traits = {});

double locality_gain(std::int64_t block_size, const GeneratorParams& params = {});

/// Converts a sample to a variant. Sensitivity is kappa * block_size /
/// `layer_max_block_size`, so it only depends on the tile size.
ImplVariant sample_to_variant(const ScheduleSample& sample, std::int64_t layer_max_block_size,
                              const GeneratorParams& params = {});

std::int64_t max_block_size(std::span<const ScheduleSample> samples);

/// Pareto levels of a sample set under (block_size, parallelism) weak
/// dominance; level 0 is the non-dominated front.
std::vector<int> pareto_levels(std::span<const ScheduleSample> samples);

// ---------------------------------------------------------------------------
// Model universe

struct ModelTemplate {
  std::string name;
  double qos_seconds = 0.0;
  std::size_t n_layers = 0;
  double total_flop = 0.0;
  /// Explicit conflict-prone layer indices; when empty, layers after the
  /// first are marked at random with `hard_probability`.
  std::vector<std::size_t> hard_layers;
  double hard_probability = 0.0;
  /// Body demand of stage k is stage_pattern[min(k, size - 1)] (plus
  /// jitter). The layers before the first leader form stage 0.
  std::vector<double> stage_pattern = {1.0};

  bool operator==(const ModelTemplate&) const = default;
};

/// The seven-model mix from the MLPerf server scenario, at desk scale.
std::vector<ModelTemplate> default_model_templates();

struct UniverseConfig {
  MachineSpec machine;
  GeneratorParams params;
  std::vector<ModelTemplate> models = default_model_templates();
  std::size_t samples_per_layer = 1024;
  std::uint64_t seed = 2022;

  bool operator==(const UniverseConfig&) const = default;
};

struct LayerProfile {
  std::size_t layer_id = 0;
  double op_count = 0.0;
  std::uint64_t shape_seed = 0;
  bool conflict_prone = false;
  double stage_demand = 1.0;
  std::vector<ScheduleSample> samples;

  bool operator==(const LayerProfile&) const = default;
};

struct ModelProfile {
  std::string model_id;
  double qos_seconds = 0.0;
  std::vector<LayerProfile> layers;

  bool operator==(const ModelProfile&) const = default;
};

struct Profiles {
  UniverseConfig config;
  std::vector<ModelProfile> models;

  bool operator==(const Profiles&) const = default;
};

/// Throws ConfigError naming the offending field.
void validate_config(const UniverseConfig& config);

Profiles generate_profiles(const UniverseConfig& config);

}  // namespace veltair
