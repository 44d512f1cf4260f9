#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "veltair/compiler.h"
#include "veltair/perfmodel.h"

namespace veltair {

/// I ~= a0 + a1 * l3_miss_rate + a2 * l3_access_rate, clamped to [0, 1].
struct LinearProxy {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double r2 = 0.0;  // on the training set

  bool operator==(const LinearProxy&) const = default;
};

struct ProxyObservation {
  CounterSnapshot counters;
  double interference = 0.0;

  bool operator==(const ProxyObservation&) const = default;
};

/// Least-squares fit via the 3x3 normal equations (ridge 1e-12). Throws
/// std::invalid_argument with fewer than 3 observations and
/// std::domain_error("rank-deficient") on a singular design.
LinearProxy fit(std::span<const ProxyObservation> observations);

double predict(const LinearProxy& proxy, const CounterSnapshot& snapshot);

/// Coefficient of determination of `proxy` on `observations` (clamped predictions).
double r_squared(const LinearProxy& proxy, std::span<const ProxyObservation> observations);
double mean_absolute_error(const LinearProxy& proxy, std::span<const ProxyObservation> observations);

/// Random co-location snapshots drawn from `universe`: a handful of blocks,
/// random versions and core counts, their counters and true pressure.
std::vector<ProxyObservation> calibration_trace(const Universe& universe, const MachineSpec& machine,
                                                std::size_t count, std::uint64_t seed);

}  // namespace veltair
