#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace veltair {

/// Simulated time and durations, integer nanoseconds.
using Nanos = std::int64_t;

constexpr Nanos kNanosPerSecond = 1'000'000'000;

inline double to_seconds(Nanos ns) { return static_cast<double>(ns) * 1e-9; }
inline Nanos from_seconds(double s) { return static_cast<Nanos>(std::llround(s * 1e9)); }

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: config values, file contents, unknown names.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A simulation invariant (core conservation, causality) was broken.
class SimulationError : public Error {
 public:
  using Error::Error;
};

/// One compiled version of a layer. Latency is fully determined by these
/// parameters together with the layer's op count (see perfmodel.h).
struct ImplVariant {
  std::string variant_id;
  std::int64_t block_size = 1;   // tile elements; only the ordering matters
  std::int64_t parallelism = 1;  // unroll factor x parallelization factor
  double solo_flops = 1.0;       // FLOP/s on one core, no interference
  double serial_fraction = 0.0;  // Amdahl serial share, [0, 1]
  double interference_sensitivity = 0.0;
  double bandwidth_factor = 1.0;  // pressure emitted per active core

  bool operator==(const ImplVariant&) const = default;
};

struct LayerSpec {
  std::size_t layer_id = 0;
  double op_count = 0.0;  // FLOP
  std::vector<ImplVariant> variants;
  Nanos qos_budget = 0;

  bool operator==(const LayerSpec&) const = default;
};

struct ModelSpec {
  std::string model_id;
  std::vector<LayerSpec> layers;
  Nanos qos = 0;
  int avg_core = 1;

  bool operator==(const ModelSpec&) const = default;
};

/// Half-open layer index interval [begin, end).
struct LayerRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const LayerRange&) const = default;
};

struct LayerBlock {
  std::string model_ref;
  LayerRange layer_range;
  int core_alloc = 1;
  Nanos block_qos = 0;
  std::vector<std::string> chosen_variant_per_layer;
  bool overflow = false;  // core_alloc was clamped below the QoS requirement

  bool operator==(const LayerBlock&) const = default;
};

/// Extra cores handed to a conflicted block once they free up.
struct CoreUpgrade {
  Nanos time = 0;
  int cores = 0;          // new total
  std::size_t layer = 0;  // model layer running when the upgrade landed

  bool operator==(const CoreUpgrade&) const = default;
};

/// One executed block of a query, with everything needed to re-price it.
/// The first layer starts after `overhead`; each later layer starts when the
/// previous one ends.
struct BlockTrace {
  LayerRange layers;
  std::vector<std::size_t> variant_index;  // per layer, into LayerSpec::variants
  Nanos start = 0;
  Nanos end = 0;
  int requested_cores = 0;
  int cores = 0;  // granted at start
  double interference_at_start = 0.0;  // true pressure seen by the first layer
  double planned_interference = 0.0;   // what the scheduler believed
  Nanos overhead = 0;
  bool conflicted = false;
  bool overflow = false;
  std::vector<CoreUpgrade> upgrades;
  /// Per layer: true pressure from the other running blocks when it started,
  /// and its finish time.
  std::vector<double> layer_interference;
  std::vector<Nanos> layer_end;

  bool operator==(const BlockTrace&) const = default;
};

struct Query {
  std::size_t query_id = 0;
  std::string model_id;
  Nanos arrival_time = 0;
  Nanos deadline = 0;
  std::optional<Nanos> finish_time;
  std::vector<BlockTrace> per_block_trace;

  bool operator==(const Query&) const = default;
};

/// Checks every domain invariant of `spec` (and of `blocks`, if given, as a
/// partition of its layers). Never throws; returns one line per violation.
std::vector<std::string> validate_model(const ModelSpec& spec, int total_cores = 64,
                                        std::span<const LayerBlock> blocks = {});

}  // namespace veltair
