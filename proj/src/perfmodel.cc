#include "veltair/perfmodel.h"

#include <algorithm>

#include "veltair/rng.h"

namespace veltair {

namespace {

void check_cores(int cores, const MachineSpec& machine) {
  if (cores < 1 || cores > machine.total_cores) {
    throw std::out_of_range("core count " + std::to_string(cores) + " outside [1, " +
                            std::to_string(machine.total_cores) + "]");
  }
}

// Bytes per tile element; a tile is block_size x block_size single-precision values.
constexpr double kBytesPerElement = 4.0;
constexpr double kCounterNoise = 0.02;

}  // namespace

double speedup(const ImplVariant& variant, int cores, const MachineSpec& machine) {
  check_cores(cores, machine);
  const double c = cores;
  return c / (1.0 + variant.serial_fraction * (c - 1.0));
}

double slowdown(const ImplVariant& variant, double interference) {
  if (!(interference >= 0.0 && interference <= 1.0)) {
    throw std::out_of_range("interference " + std::to_string(interference) + " outside [0, 1]");
  }
  return std::min(kMaxSlowdown, 1.0 + variant.interference_sensitivity * interference);
}

double latency(double op_count, const ImplVariant& variant, int cores, double interference,
               const MachineSpec& machine) {
  return op_count / (variant.solo_flops * speedup(variant, cores, machine)) *
         slowdown(variant, interference);
}

double latency(const LayerSpec& layer, const ImplVariant& variant, int cores,
               double interference, const MachineSpec& machine) {
  return latency(layer.op_count, variant, cores, interference, machine);
}

int min_core_requirement(const LayerSpec& layer, const ImplVariant& variant,
                         double interference, const MachineSpec& machine) {
  const double budget = to_seconds(layer.qos_budget);
  return min_cores_for(
      [&](int c) { return latency(layer, variant, c, interference, machine); }, budget, machine);
}

double pressure(std::span<const ActiveLoad> active, const MachineSpec& machine) {
  double load = 0.0;
  int used = 0;
  for (const auto& a : active) {
    used += a.cores;
    load += a.variant->bandwidth_factor * a.cores;
  }
  if (used > machine.total_cores) {
    throw std::invalid_argument("active set uses " + std::to_string(used) + " of " +
                                std::to_string(machine.total_cores) + " cores");
  }
  return std::min(1.0, load / machine.total_cores);
}

double access_coefficient(const ImplVariant& variant, const MachineSpec& machine) {
  return variant.bandwidth_factor / machine.total_cores;
}

double cache_footprint(const ImplVariant& variant) {
  const double bs = static_cast<double>(variant.block_size);
  return bs * bs * kBytesPerElement;
}

CounterSnapshot simulate_counters(std::span<const ActiveLoad> active, const MachineSpec& machine,
                                  std::uint64_t noise_seed, double timestamp) {
  double access = 0.0;
  double footprint = 0.0;
  for (const auto& a : active) {
    access += a.cores * access_coefficient(*a.variant, machine);
    footprint += a.cores * cache_footprint(*a.variant);
  }
  double miss = 1.0 - std::exp(-footprint / machine.l3_capacity);

  access *= 1.0 + kCounterNoise * (2.0 * to_unit(mix_seed(noise_seed, 1)) - 1.0);
  miss *= 1.0 + kCounterNoise * (2.0 * to_unit(mix_seed(noise_seed, 2)) - 1.0);
  return CounterSnapshot{access, std::clamp(miss, 0.0, 1.0), timestamp};
}

}  // namespace veltair
