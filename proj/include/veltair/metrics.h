#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "veltair/engine.h"

namespace veltair {

/// Queries whose arrival falls inside the measured window.
std::vector<const Query*> measured_queries(const SimResult& result);

/// Fraction of measured queries finishing by their deadline. Throws
/// std::invalid_argument on an empty window.
double qos_satisfaction(const SimResult& result);
std::map<std::string, double> qos_satisfaction_per_model(const SimResult& result);

/// Mean (finish - arrival) of measured queries, seconds. Throws on an empty window.
double average_latency(const SimResult& result);

/// Cores an unconflicted layer_wise run gives a layer: the fewest meeting its
/// budget alone with its solo-fastest version at I = 0 (all cores when none do).
int layer_optimal_cores(const LayerSpec& layer, const MachineSpec& machine);

/// Executed layers priced at their layer-optimal core count (same version,
/// same interference), over the core-seconds their blocks held (overheads
/// and upgrades included). 1.0 for layer_wise without conflicts.
double cpu_usage_efficiency(const SimResult& result, const Universe& universe);

/// Conflicted allocation events over all allocation events (0 when none).
double conflict_rate(const SimResult& result);

/// Time-averaged share of cores held by blocks over the measured window.
double system_load(const SimResult& result);

/// Core-seconds held by one block, upgrades included.
double block_core_seconds(const BlockTrace& trace);

struct QpsPoint {
  double lambda = 0.0;
  double satisfaction = 0.0;
};

struct QpsEstimate {
  double lambda_star = 0.0;  // largest tested rate before the first failure
  double low = 0.0;          // bracket: passes at low ...
  double high = 0.0;         // ... first failure at high
  bool unsaturated = false;  // every tested rate passed
  bool below_range = false;  // the smallest tested rate already failed
  bool non_monotone = false;  // a rate above the first failure passed again
  std::vector<QpsPoint> points;
};

/// Reads the estimate off an evaluated grid (any order).
QpsEstimate qps_from_points(std::vector<QpsPoint> points, double target = 0.95);

struct QpsSearch {
  double lo = 50.0;
  double hi = 800.0;
  double coarse_step = 50.0;
  double fine_step = 10.0;
  double target = 0.95;
};

/// Coarse grid over [lo, hi], then a fine grid inside the first failing
/// bracket. `satisfaction_at` must be deterministic.
QpsEstimate qps_at_95(const std::function<double(double)>& satisfaction_at, const QpsSearch& search);

/// Grid points lo, lo + step, ... up to hi (inclusive, within 1e-9).
std::vector<double> rate_grid(double lo, double hi, double step);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::string strategy;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double satisfaction = 0.0;
  double avg_latency_ms = 0.0;
  double efficiency = 0.0;
  double conflict_rate = 0.0;
  double load = 0.0;
};

struct SweepSummary {
  std::string strategy;
  QpsEstimate qps;
};

struct SweepConfig {
  std::vector<SchedulingStrategy> strategies;
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds;
  WorkloadSpec workload;  // rates are rescaled to each lambda
  SimOptions options;
  unsigned threads = 1;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // strategy-major, then lambda, then seed
  std::vector<SweepSummary> summaries;
};

SweepRow summarize_run(const SimResult& result, const Universe& universe, double lambda);

/// Runs every (strategy, lambda, seed) cell; the per-strategy estimate uses
/// the seed-averaged satisfaction at each lambda. Throws ConfigError on an
/// empty grid.
SweepResult run_sweep(const Universe& universe, const SweepConfig& config);

/// Mean satisfaction over seeds at one total rate.
double mean_satisfaction(const Universe& universe, const WorkloadSpec& workload, const SchedulingStrategy& strategy,
                         const SimOptions& options, std::span<const std::uint64_t> seeds, double lambda);

/// Threads allowed for sweeps: VELTAIR_SIM_THREADS if set, else hardware concurrency.
unsigned sweep_threads();

/// CSV with header strategy,lambda,seed,satisfaction,avg_latency_ms,efficiency,
/// conflict_rate,qps95_low,qps95_high. One row per cell, then one summary row
/// per strategy with seed "qps95" and lambda = lambda_star.
void write_csv(std::ostream& out, const SweepResult& sweep);

/// RFC-4180 field quoting.
std::string csv_field(const std::string& text);

}  // namespace veltair
