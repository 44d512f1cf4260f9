#include "veltair/profile_gen.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

#include "veltair/rng.h"

namespace veltair {

namespace {

double log2_fraction(std::int64_t value, std::int64_t lo, std::int64_t hi) {
  const double span = std::log2(static_cast<double>(hi)) - std::log2(static_cast<double>(lo));
  if (span <= 0.0) return 1.0;
  const double x = (std::log2(static_cast<double>(value)) - std::log2(static_cast<double>(lo))) / span;
  return std::clamp(x, 0.0, 1.0);
}

double serial_fraction_for(std::int64_t parallelism, const LayerShape& shape,
                           const GeneratorParams& p) {
  const double y = log2_fraction(parallelism, 1, p.max_parallelism);
  return std::clamp(shape.serial_fraction * std::pow(p.serial_parallel_span, 1.0 - y), 0.0, 0.95);
}

double geometric(double at_zero, double at_one, double t) {
  return at_zero * std::pow(at_one / at_zero, t);
}

double bandwidth_factor_for(std::int64_t block_size, const GeneratorParams& p) {
  const double x = log2_fraction(block_size, p.min_block_size, p.max_block_size);
  return p.bandwidth_factor_max - (p.bandwidth_factor_max - p.bandwidth_factor_min) * x;
}

}  // namespace

LayerShape derive_shape(std::uint64_t layer_shape_seed, const LayerTraits& traits,
                        const GeneratorParams& params) {
  Rng rng(mix_seed(layer_shape_seed, 0x5a3e));
  LayerShape shape;
  shape.capacity_log2 = rng.uniform(11.0, 14.0);
  const double d = traits.conflict_prone ? 0.0 : std::clamp(traits.stage_demand, 0.0, 1.0);
  shape.efficiency = geometric(params.heavy_efficiency, 1.0, d) * std::exp(params.layer_jitter * rng.normal());
  shape.serial_fraction = geometric(params.heavy_serial_fraction, params.light_serial_fraction, d);
  if (traits.conflict_prone) shape.efficiency *= params.leader_efficiency;
  return shape;
}

double locality_gain(std::int64_t block_size, const GeneratorParams& params) {
  const double r = static_cast<double>(block_size) / static_cast<double>(params.max_block_size);
  return std::pow(std::clamp(r, 0.0, 1.0), params.locality_exponent);
}

std::vector<ScheduleSample> generate_samples(std::uint64_t layer_shape_seed, double op_count,
                                             std::size_t n_samples, std::uint64_t rng_seed,
                                             const GeneratorParams& params,
                                             const MachineSpec& machine, const LayerTraits& traits) {
  if (n_samples == 0) throw std::invalid_argument("empty search");
  if (!(op_count > 0.0)) throw std::invalid_argument("op_count must be positive");

  const LayerShape shape = derive_shape(layer_shape_seed, traits, params);
  Rng rng(mix_seed(rng_seed, layer_shape_seed));

  const double lb_lo = std::log2(static_cast<double>(params.min_block_size));
  const double lb_hi = std::log2(static_cast<double>(params.max_block_size));
  const double lp_hi = std::log2(static_cast<double>(params.max_parallelism));

  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  std::vector<ScheduleSample> out;
  out.reserve(n_samples);
  const std::size_t max_attempts = 200 * n_samples + 1000;
  for (std::size_t attempt = 0; out.size() < n_samples; ++attempt) {
    if (attempt >= max_attempts) throw std::runtime_error("search space exhausted");
    const double lb = rng.uniform(lb_lo, lb_hi);
    const double depth = params.frontier_depth * rng.uniform();
    const double lp = std::clamp(shape.capacity_log2 - depth - lb, 0.0, lp_hi);
    const double noise = params.search_noise_max * rng.uniform();

    ScheduleSample s;
    s.block_size = std::clamp<std::int64_t>(std::llround(std::exp2(lb)), params.min_block_size,
                                            params.max_block_size);
    s.parallelism = std::clamp<std::int64_t>(std::llround(std::exp2(lp)), 1, params.max_parallelism);
    if (!seen.emplace(s.block_size, s.parallelism).second) continue;

    s.search_noise = noise;
    s.solo_flops = machine.peak_flops_per_core * locality_gain(s.block_size, params) *
                   shape.efficiency * (1.0 - noise);
    s.serial_fraction = serial_fraction_for(s.parallelism, shape, params);
    s.bandwidth_factor = bandwidth_factor_for(s.block_size, params);
    ImplVariant probe;
    probe.solo_flops = s.solo_flops;
    probe.serial_fraction = s.serial_fraction;
    s.solo_time = latency(op_count, probe, std::min(params.reference_cores, machine.total_cores),
                          0.0, machine);
    out.push_back(s);
  }
  return out;
}

std::int64_t max_block_size(std::span<const ScheduleSample> samples) {
  std::int64_t m = 1;
  for (const auto& s : samples) m = std::max(m, s.block_size);
  return m;
}

ImplVariant sample_to_variant(const ScheduleSample& sample, std::int64_t layer_max_block_size,
                              const GeneratorParams& params) {
  ImplVariant v;
  v.variant_id = "bs" + std::to_string(sample.block_size) + "_p" + std::to_string(sample.parallelism);
  v.block_size = sample.block_size;
  v.parallelism = sample.parallelism;
  v.solo_flops = sample.solo_flops;
  v.serial_fraction = sample.serial_fraction;
  v.bandwidth_factor = sample.bandwidth_factor;
  v.interference_sensitivity = params.kappa * static_cast<double>(sample.block_size) /
                               static_cast<double>(std::max<std::int64_t>(1, layer_max_block_size));
  return v;
}

std::vector<int> pareto_levels(std::span<const ScheduleSample> samples) {
  // Peeling: repeatedly strip the current non-dominated front.
  std::vector<int> level(samples.size(), -1);
  std::size_t assigned = 0;
  for (int current = 0; assigned < samples.size(); ++current) {
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (level[i] != -1) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < samples.size() && !dominated; ++j) {
        if (j == i || level[j] != -1) continue;
        dominated = samples[j].block_size >= samples[i].block_size &&
                    samples[j].parallelism >= samples[i].parallelism;
      }
      if (!dominated) front.push_back(i);
    }
    for (auto i : front) level[i] = current;
    assigned += front.size();
  }
  return level;
}

std::vector<ModelTemplate> default_model_templates() {
  // Layer counts and FLOP totals are scaled stand-ins; names and QoS targets
  // follow the MLPerf server table.
  return {
      {"ResNet-50", 0.015, 55, 0.63e9, {0, 11, 24, 43}, 0.0, {0.0, 1.0, 0.0, 1.0}},
      {"GoogLeNet", 0.015, 58, 0.54e9, {34, 46}, 0.0, {1.0, 0.0, 0.5}},
      {"EfficientNet", 0.010, 50, 0.3e9, {30, 40}, 0.0, {1.0, 0.3, 0.1}},
      {"MobileNet-V2", 0.010, 53, 0.3e9, {32, 43}, 0.0, {1.0, 0.1, 0.3}},
      {"SSD", 0.100, 40, 4.2e9, {22, 32}, 0.0, {1.0, 0.0, 0.5}},
      {"Tiny-YOLOv2", 0.010, 9, 0.42e9, {4}, 0.0, {1.0, 0.0}},
      {"Bert-Large", 0.130, 48, 5.4e9, {34, 42}, 0.0, {1.0, 0.0, 0.5}},
  };
}

void validate_config(const UniverseConfig& config) {
  if (config.machine.total_cores < 1) throw ConfigError("machine.total_cores must be >= 1");
  if (!(config.machine.peak_flops_per_core > 0.0))
    throw ConfigError("machine.peak_flops_per_core must be positive");
  if (config.samples_per_layer == 0) throw ConfigError("samples_per_layer must be >= 1");
  const auto& p = config.params;
  if (p.min_block_size < 1 || p.max_block_size < p.min_block_size)
    throw ConfigError("params.min_block_size/max_block_size invalid");
  if (p.max_parallelism < 1) throw ConfigError("params.max_parallelism must be >= 1");
  if (p.reference_cores < 1) throw ConfigError("params.reference_cores must be >= 1");
  if (!(p.heavy_efficiency > 0.0 && p.heavy_efficiency <= 1.0))
    throw ConfigError("params.heavy_efficiency must be in (0, 1]");
  if (!(p.heavy_serial_fraction > 0.0 && p.heavy_serial_fraction < 1.0))
    throw ConfigError("params.heavy_serial_fraction must be in (0, 1)");
  if (!(p.light_serial_fraction > 0.0 && p.light_serial_fraction < 1.0))
    throw ConfigError("params.light_serial_fraction must be in (0, 1)");
  if (!(p.serial_parallel_span >= 1.0)) throw ConfigError("params.serial_parallel_span must be >= 1");
  if (!(p.leader_efficiency > 0.0)) throw ConfigError("params.leader_efficiency must be positive");
  if (!(p.leader_op_weight > 0.0)) throw ConfigError("params.leader_op_weight must be positive");
  if (!(p.light_op_weight > 0.0)) throw ConfigError("params.light_op_weight must be positive");
  if (p.layer_jitter < 0.0 || p.stage_jitter < 0.0) throw ConfigError("params jitter must be non-negative");
  if (!(p.kappa >= 0.0)) throw ConfigError("params.kappa must be non-negative");
  if (!(p.locality_exponent > 0.0 && p.locality_exponent < 1.0))
    throw ConfigError("params.locality_exponent must be in (0, 1)");
  if (p.search_noise_max < 0.0 || p.search_noise_max >= 1.0)
    throw ConfigError("params.search_noise_max must be in [0, 1)");
  if (config.models.empty()) throw ConfigError("models must not be empty");
  for (std::size_t i = 0; i < config.models.size(); ++i) {
    const auto& m = config.models[i];
    const std::string where = "models[" + std::to_string(i) + "]";
    if (m.name.empty()) throw ConfigError(where + ".name must not be empty");
    if (!(m.qos_seconds > 0.0)) throw ConfigError(where + ".qos_seconds must be positive");
    if (m.n_layers == 0) throw ConfigError(where + ".n_layers must be >= 1");
    if (!(m.total_flop > 0.0)) throw ConfigError(where + ".total_flop must be positive");
    for (auto h : m.hard_layers) {
      if (h >= m.n_layers) throw ConfigError(where + ".hard_layers index out of range");
    }
    if (m.stage_pattern.empty()) throw ConfigError(where + ".stage_pattern must not be empty");
    for (double d : m.stage_pattern) {
      if (!(d >= 0.0 && d <= 1.0)) throw ConfigError(where + ".stage_pattern entries must be in [0, 1]");
    }
  }
}

Profiles generate_profiles(const UniverseConfig& config) {
  validate_config(config);
  const auto& params = config.params;
  Profiles out;
  out.config = config;
  for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
    const auto& tpl = config.models[mi];
    const std::uint64_t model_seed = mix_seed(config.seed, mi + 1);
    Rng rng(model_seed);

    std::vector<bool> leader(tpl.n_layers, false);
    for (std::size_t li = 0; li < tpl.n_layers; ++li) {
      const double coin = rng.uniform();
      leader[li] = tpl.hard_layers.empty()
                       ? li > 0 && coin < tpl.hard_probability
                       : std::find(tpl.hard_layers.begin(), tpl.hard_layers.end(), li) != tpl.hard_layers.end();
    }
    std::vector<double> demand(tpl.n_layers);
    std::size_t stage = 0;
    for (std::size_t li = 0; li < tpl.n_layers; ++li) {
      if (li == 0 || leader[li]) {
        if (li > 0) ++stage;
        const double base = tpl.stage_pattern[std::min(stage, tpl.stage_pattern.size() - 1)];
        demand[li] = std::clamp(base + params.stage_jitter * rng.normal(), 0.0, 1.0);
      } else {
        demand[li] = demand[li - 1];
      }
    }
    std::vector<double> weights(tpl.n_layers);
    for (std::size_t li = 0; li < tpl.n_layers; ++li) {
      weights[li] = std::exp(0.4 * rng.normal()) *
                    (leader[li] ? params.leader_op_weight : std::pow(params.light_op_weight, demand[li]));
    }
    const double total_w = std::accumulate(weights.begin(), weights.end(), 0.0);

    ModelProfile mp;
    mp.model_id = tpl.name;
    mp.qos_seconds = tpl.qos_seconds;
    for (std::size_t li = 0; li < tpl.n_layers; ++li) {
      LayerProfile lp;
      lp.layer_id = li;
      lp.op_count = tpl.total_flop * weights[li] / total_w;
      lp.shape_seed = mix_seed(model_seed, 1000 + li);
      lp.conflict_prone = leader[li];
      lp.stage_demand = demand[li];
      lp.samples = generate_samples(lp.shape_seed, lp.op_count, config.samples_per_layer,
                                    mix_seed(config.seed, 77), params, config.machine,
                                    {lp.conflict_prone, lp.stage_demand});
      mp.layers.push_back(std::move(lp));
    }
    out.models.push_back(std::move(mp));
  }
  return out;
}

}  // namespace veltair
