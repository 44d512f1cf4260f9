#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "veltair/domain.h"
#include "veltair/perfmodel.h"

namespace veltair {

enum class StrategyKind {
  model_wise_fcfs,
  layer_wise,
  fixed_block,
  veltair_as,  // adaptive scheduling only
  veltair_ac,  // adaptive compilation only
  veltair_full,
};

struct SchedulingStrategy {
  StrategyKind kind = StrategyKind::veltair_full;
  std::size_t fixed_block_size = 6;

  /// Canonical name, e.g. "fixed_block(6)".
  std::string name() const;
  /// Accepts the canonical names plus "fixed_block:N" and dashed spellings.
  /// Throws ConfigError on anything else.
  static SchedulingStrategy parse(std::string_view text);

  /// Runs the multi-version universe and picks versions by interference.
  bool adaptive_compilation() const;
  /// Forms blocks with the dynamic threshold.
  bool adaptive_scheduling() const;
  /// Reads the interference proxy at block formation.
  bool interference_aware() const { return adaptive_compilation() || adaptive_scheduling(); }

  bool operator==(const SchedulingStrategy&) const = default;
};

struct ConflictModel {
  Nanos per_conflict_overhead = 220'000;  // mean
  /// Draw overheads from a log-normal with this median and the mean above.
  bool stochastic = false;
  Nanos median_overhead = 100'000;
  /// Test fixture: mark this fraction of allocation events as conflicted
  /// (evenly spaced) and let them proceed at full allocation after paying
  /// the overhead.
  std::optional<double> forced_rate;

  bool operator==(const ConflictModel&) const = default;
};

struct ConflictOutcome {
  int granted = 0;
  Nanos overhead = 0;
  bool conflicted = false;
};

/// A layer that asks for more cores than are free runs on what is free and
/// pays one reallocation overhead. `draw_key` seeds the stochastic mode.
ConflictOutcome apply_conflict(int requested, int available, const ConflictModel& model,
                               std::uint64_t draw_key = 0);

/// Index of the first entry with requirement >= avg_c + thres.
std::optional<std::size_t> finding_first_pivot(std::span<const int> requirements, int thres, int avg_c);

/// Splits idle cores (total - sum of averages) across active models in
/// proportion to their averages; leftover cores go one each to the largest
/// averages first. All zeros when the averages already fill the machine.
std::vector<int> dynamic_threshold(std::span<const int> avg_cores, int total_cores);

/// Version with the lowest latency at `cores` under `interference`; ties go
/// to the smaller block size.
std::size_t choose_variant(const LayerSpec& layer, double interference, int cores,
                           const MachineSpec& machine = {});

/// A block ready to start: which layers, which versions, how many cores.
struct PlannedBlock {
  LayerRange range;
  std::vector<std::size_t> variant_index;  // one per layer in range
  int cores = 1;
  Nanos block_qos = 0;
  bool overflow = false;
  double planned_interference = 0.0;

  LayerBlock to_layer_block(const ModelSpec& model) const;
};

/// Sum of member latencies at `cores`.
double block_latency(const ModelSpec& model, LayerRange range, std::span<const std::size_t> variants,
                     int cores, double interference, const MachineSpec& machine);

/// Forms the block that starts at `begin`: it ends right before the next
/// layer (after `begin`) whose core requirement reaches avg_core + thres.
/// Its allocation is the fewest cores meeting the summed member budgets,
/// capped at avg_core + thres (overflow flagged when the cap binds).
PlannedBlock worker_step(const ModelSpec& model, std::size_t begin, double interference, int thres,
                         const MachineSpec& machine = {});

/// The full partition worker_step would produce at a fixed interference and
/// threshold, for inspection.
std::vector<LayerBlock> form_layer_blocks(const ModelSpec& model, double interference, int thres,
                                          const MachineSpec& machine = {});

/// Pivot search on a whole model with a fixed version choice.
std::optional<std::size_t> finding_first_pivot(const ModelSpec& model,
                                               std::span<const std::size_t> variant_choice,
                                               double interference, int thres,
                                               const MachineSpec& machine = {});

/// True when at most 10% of the block's predicted latency remains.
bool soon_to_finish(Nanos start, Nanos predicted_end, Nanos now);

/// Plans the next block for any strategy. `interference` and `thres` are
/// only consulted by interference-aware strategies.
PlannedBlock plan_block(const SchedulingStrategy& strategy, const ModelSpec& model, std::size_t begin,
                        double interference, int thres, const MachineSpec& machine);

}  // namespace veltair
