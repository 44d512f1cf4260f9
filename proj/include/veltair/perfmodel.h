#pragma once

#include <cstdint>
#include <span>

#include "veltair/domain.h"

namespace veltair {

struct MachineSpec {
  int total_cores = 64;
  double l3_capacity = 256.0 * 1024 * 1024;  // bytes
  double peak_flops_per_core = 92.8e9;       // 2.9 GHz x 32 FLOP/cycle

  bool operator==(const MachineSpec&) const = default;
};

struct CounterSnapshot {
  double l3_access_rate = 0.0;  // normalized accesses/s
  double l3_miss_rate = 0.0;    // [0, 1]
  double timestamp = 0.0;       // seconds

  bool operator==(const CounterSnapshot&) const = default;
};

/// One running block as seen by the shared-resource model.
struct ActiveLoad {
  const ImplVariant* variant = nullptr;
  int cores = 0;
};

/// Slowdown never exceeds this, whatever the sensitivity.
constexpr double kMaxSlowdown = 7.0;

/// Amdahl speedup: cores / (1 + serial_fraction * (cores - 1)).
double speedup(const ImplVariant& variant, int cores, const MachineSpec& machine = {});

/// 1 + sensitivity * I, capped at kMaxSlowdown. I must lie in [0, 1].
double slowdown(const ImplVariant& variant, double interference);

/// Seconds to run `op_count` FLOP with `variant` on `cores` under `interference`.
double latency(double op_count, const ImplVariant& variant, int cores, double interference,
               const MachineSpec& machine = {});
double latency(const LayerSpec& layer, const ImplVariant& variant, int cores,
               double interference, const MachineSpec& machine = {});

/// Smallest core count meeting the layer's qos_budget, or total_cores + 1.
int min_core_requirement(const LayerSpec& layer, const ImplVariant& variant,
                         double interference, const MachineSpec& machine = {});

/// Smallest core count at which `total_latency(c)` fits in `budget`, or
/// total_cores + 1. `total_latency` must be non-increasing in c.
template <typename F>
int min_cores_for(F&& total_latency, double budget_seconds, const MachineSpec& machine) {
  int lo = 1;
  int hi = machine.total_cores;
  if (total_latency(hi) > budget_seconds) return machine.total_cores + 1;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (total_latency(mid) <= budget_seconds) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

/// Interference level generated by a set of running blocks:
/// min(1, sum(bandwidth_factor * cores) / total_cores).
double pressure(std::span<const ActiveLoad> active, const MachineSpec& machine = {});

/// Synthetic L3 counters for a set of running blocks. `noise_seed` drives a
/// bounded (<= 2%) multiplicative perturbation; the result is a pure function
/// of its arguments.
CounterSnapshot simulate_counters(std::span<const ActiveLoad> active, const MachineSpec& machine,
                                  std::uint64_t noise_seed, double timestamp = 0.0);

/// Per-core L3 access intensity of a variant (normalized units).
double access_coefficient(const ImplVariant& variant, const MachineSpec& machine = {});
/// Per-core cache footprint of a variant, bytes.
double cache_footprint(const ImplVariant& variant);

}  // namespace veltair
