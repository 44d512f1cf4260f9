#pragma once

#include <algorithm>
#include <concepts>
#include <span>
#include <vector>

#include "veltair/domain.h"
#include "veltair/perfmodel.h"
#include "veltair/profile_gen.h"

namespace veltair {

/// Anything that lives in the parallelism-locality plane.
template <typename T>
concept TradeoffPoint = requires(const T& t) {
  { t.block_size } -> std::convertible_to<std::int64_t>;
  { t.parallelism } -> std::convertible_to<std::int64_t>;
};

/// Fills every layer's qos_budget in proportion to its op count. The last
/// layer absorbs the integer rounding residual so budgets sum to qos exactly.
ModelSpec apportion_qos(ModelSpec model);

/// Samples whose solo_time fits the budget, in input order.
std::vector<ScheduleSample> filter_by_qos(std::span<const ScheduleSample> samples,
                                          double budget_seconds);

/// Non-dominated subset under weak dominance: j dominates i when
/// j.block_size >= i.block_size and j.parallelism >= i.parallelism (j != i).
/// Input must be unique in (block_size, parallelism). Output is sorted by
/// ascending block_size. O(n log n).
template <TradeoffPoint T>
std::vector<T> extract_dominant(std::span<const T> samples) {
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (samples[a].block_size != samples[b].block_size)
      return samples[a].block_size > samples[b].block_size;
    return samples[a].parallelism > samples[b].parallelism;
  });
  // Sweep from the largest block size; a point survives iff its parallelism
  // beats everything with a larger (or equal, earlier) block size.
  std::vector<T> front;
  std::int64_t best_parallelism = 0;
  bool any = false;
  for (auto i : order) {
    if (!any || samples[i].parallelism > best_parallelism) {
      front.push_back(samples[i]);
      best_parallelism = samples[i].parallelism;
      any = true;
    }
  }
  std::reverse(front.begin(), front.end());
  return front;
}

template <TradeoffPoint T>
std::vector<T> extract_dominant(const std::vector<T>& samples) {
  return extract_dominant(std::span<const T>(samples));
}

/// Indices 0, step, 2*step, ... with step = max(1, n / versions); all of
/// `dominant` when it is no longer than `versions`.
std::vector<std::size_t> stride_indices(std::size_t n, std::size_t versions);

template <typename T>
std::vector<T> select_versions(std::span<const T> dominant, std::size_t versions) {
  std::vector<T> out;
  for (auto i : stride_indices(dominant.size(), versions)) out.push_back(dominant[i]);
  return out;
}

template <typename T>
std::vector<T> select_versions(const std::vector<T>& dominant, std::size_t versions) {
  return select_versions(std::span<const T>(dominant), versions);
}

/// Uniform interference grid {0.1, 0.2, ..., 1.0}.
std::vector<double> interference_levels();
/// The same grid with the solo point I = 0 in front.
std::vector<double> interference_levels_with_solo();

/// Where a layer's performance surface is sampled for envelope decisions.
struct SurfaceProbe {
  double op_count = 1.0;
  int cores = 16;
  std::vector<double> levels = interference_levels();
  MachineSpec machine;
};

/// Min-latency envelope of `versions` over probe.levels.
std::vector<double> latency_envelope(std::span<const ImplVariant> versions, const SurfaceProbe& probe);

/// Worst-case relative performance loss of `subset` against `reference`:
/// max over levels of 1 - env_reference / env_subset. Zero when equal.
double envelope_loss(std::span<const ImplVariant> subset, std::span<const ImplVariant> reference,
                     const SurfaceProbe& probe);

/// Greedily drops versions while the remaining envelope keeps at least
/// `keep_ratio` of the full set's performance at every level. Never removes
/// the last version. Output keeps input order.
std::vector<ImplVariant> prune_redundant(std::span<const ImplVariant> selected,
                                         const SurfaceProbe& probe, double keep_ratio = 0.9);

/// Loss of the best nested subsets of `dominant`: entry k is the worst-case
/// loss of the greedily grown (k+1)-version set. Non-increasing; the last
/// entry is 0.
std::vector<double> nested_envelope_losses(std::span<const ImplVariant> dominant,
                                           const SurfaceProbe& probe);

struct CompileOptions {
  std::size_t versions = 5;
  double keep_ratio = 0.9;
  int probe_cores = 16;
  bool prune = true;
  /// Also probe I = 0 when pruning, so the solo-optimal version can survive.
  bool probe_solo = true;
  /// Add the fastest feasible solo version to the stride pick before pruning.
  bool keep_solo_fastest = true;
  /// Share of the deadline the schedulers plan for; the rest absorbs queueing
  /// and interference the plan did not foresee.
  double qos_headroom = 0.7;

  bool operator==(const CompileOptions&) const = default;
};

struct CompiledLayerInfo {
  std::vector<ImplVariant> dominant;  // sorted by block_size
  std::vector<ImplVariant> stride_selected;
  bool qos_infeasible_solo = false;
  std::size_t feasible_samples = 0;

  bool operator==(const CompiledLayerInfo&) const = default;
};

/// Result of the offline compiler for one model. `adaptive` carries the
/// multi-version set per layer; `baseline` carries the single fastest-solo
/// version a one-shot auto-scheduler would emit.
struct CompiledModel {
  ModelSpec adaptive;  // qos here is the planning target, deadline x headroom
  ModelSpec baseline;
  Nanos deadline = 0;  // end-to-end QoS a query is judged against
  std::vector<CompiledLayerInfo> info;
  bool avg_core_clamped = false;

  bool operator==(const CompiledModel&) const = default;
};

using Universe = std::vector<CompiledModel>;

/// Model-granularity core requirement: fewest cores at which the model meets
/// its QoS when every layer runs its fastest version at zero interference.
/// Returns total_cores + 1 when no count suffices.
int model_core_requirement(const ModelSpec& model, const MachineSpec& machine);

CompiledModel compile_model(const ModelProfile& profile, const CompileOptions& options,
                            const GeneratorParams& params, const MachineSpec& machine);

Universe compile_universe(const Profiles& profiles, const CompileOptions& options);

}  // namespace veltair
