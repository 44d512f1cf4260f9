#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "veltair/compiler.h"
#include "veltair/domain.h"
#include "veltair/perfmodel.h"
#include "veltair/proxy.h"
#include "veltair/scheduler.h"

namespace veltair {

enum class MixMode { explicit_rates, inverse_qos };

struct WorkloadEntry {
  std::string model_id;
  double rate = 0.0;  // queries/s

  bool operator==(const WorkloadEntry&) const = default;
};

struct WorkloadSpec {
  std::vector<WorkloadEntry> entries;
  double duration = 1.0;  // seconds
  std::uint64_t rng_seed = 1;
  /// inverse_qos keeps the total rate but splits it in proportion to 1/qos.
  MixMode mix_mode = MixMode::explicit_rates;

  double total_rate() const;
  bool operator==(const WorkloadSpec&) const = default;
};

/// Copy of `spec` with every rate scaled so they sum to `total`.
WorkloadSpec with_total_rate(WorkloadSpec spec, double total);

/// Effective per-entry arrival rates. Throws ConfigError on unknown models,
/// non-positive rates or duration.
std::vector<double> resolve_rates(const WorkloadSpec& spec, const Universe& universe);

/// Poisson arrivals per entry, merged and sorted by time (ties by entry
/// order); query ids follow that order.
std::vector<Query> generate_arrivals(const WorkloadSpec& spec, const Universe& universe);

enum class EventKind : int { finish = 0, arrival = 1, counter_sample = 2 };

struct SimEvent {
  Nanos time = 0;
  EventKind kind = EventKind::arrival;
  std::size_t payload = 0;
  std::uint64_t generation = 0;  // finish events go stale when a layer is re-priced
  std::uint64_t sequence = 0;
};

/// Total order: time, then kind (finish < arrival < sample), then sequence.
bool event_before(const SimEvent& a, const SimEvent& b);

struct CounterRecord {
  CounterSnapshot snapshot;
  double interference = 0.0;  // true pressure of everything running

  bool operator==(const CounterRecord&) const = default;
};

struct ConflictRecord {
  Nanos time = 0;
  std::size_t query_id = 0;
  std::size_t block = 0;  // index into that query's trace
  int requested = 0;
  int granted = 0;
  Nanos overhead = 0;

  bool operator==(const ConflictRecord&) const = default;
};

struct SimOptions {
  MachineSpec machine;
  ConflictModel conflict;
  LinearProxy proxy{0.0, 0.0, 1.0, 1.0};
  Nanos sample_period = 1'000'000;
  /// Queries arriving in the first and last fraction of the run are not measured.
  double warmup_fraction = 0.05;
  bool record_counters = true;

  bool operator==(const SimOptions&) const = default;
};

struct SimResult {
  std::string strategy;
  std::uint64_t seed = 0;
  WorkloadSpec workload;
  SimOptions options;
  std::vector<Query> queries;  // indexed by query_id
  std::vector<CounterRecord> counters;
  std::vector<ConflictRecord> conflicts;
  std::size_t allocation_events = 0;
  Nanos end_time = 0;
  Nanos window_begin = 0;  // measured arrivals: [window_begin, window_end)
  Nanos window_end = 0;

  bool operator==(const SimResult&) const = default;
};

/// The compiled view a strategy runs: multi-version for adaptive compilation,
/// the single fastest-solo version otherwise.
const ModelSpec& strategy_view(const CompiledModel& model, const SchedulingStrategy& strategy);

/// Latency of one query of `model` alone on an empty machine, priced
/// analytically from the blocks `strategy` would form at zero interference.
double isolated_latency(const CompiledModel& model, const SchedulingStrategy& strategy,
                        const MachineSpec& machine);

/// Runs the workload to completion. Throws ConfigError on unknown models
/// (before any event is processed) and SimulationError when core accounting
/// breaks.
SimResult run(const Universe& universe, const WorkloadSpec& workload, const SchedulingStrategy& strategy,
              const SimOptions& options, std::uint64_t seed);

struct PlacedArrival {
  std::string model_id;
  Nanos time = 0;
};

/// Runs hand-placed queries instead of Poisson arrivals. The recorded
/// workload has no entries; `duration` sets the measured window.
SimResult run_arrivals(const Universe& universe, std::span<const PlacedArrival> arrivals, double duration,
                       const SchedulingStrategy& strategy, const SimOptions& options, std::uint64_t seed);

}  // namespace veltair
