#include "veltair/scheduler.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "veltair/rng.h"

namespace veltair {

std::string SchedulingStrategy::name() const {
  switch (kind) {
    case StrategyKind::model_wise_fcfs: return "model_wise";
    case StrategyKind::layer_wise: return "layer_wise";
    case StrategyKind::fixed_block: return "fixed_block(" + std::to_string(fixed_block_size) + ")";
    case StrategyKind::veltair_as: return "veltair_as";
    case StrategyKind::veltair_ac: return "veltair_ac";
    case StrategyKind::veltair_full: return "veltair_full";
  }
  return "unknown";
}

SchedulingStrategy SchedulingStrategy::parse(std::string_view text) {
  std::string s;
  for (char c : text) s.push_back(c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  SchedulingStrategy out;
  if (s == "model_wise" || s == "model_wise_fcfs") {
    out.kind = StrategyKind::model_wise_fcfs;
  } else if (s == "layer_wise") {
    out.kind = StrategyKind::layer_wise;
  } else if (s == "veltair_as") {
    out.kind = StrategyKind::veltair_as;
  } else if (s == "veltair_ac") {
    out.kind = StrategyKind::veltair_ac;
  } else if (s == "veltair_full" || s == "veltair") {
    out.kind = StrategyKind::veltair_full;
  } else if (s.rfind("fixed_block", 0) == 0) {
    out.kind = StrategyKind::fixed_block;
    std::string arg = s.substr(std::string("fixed_block").size());
    if (!arg.empty() && (arg.front() == '(' || arg.front() == ':' || arg.front() == '_')) arg.erase(0, 1);
    if (!arg.empty() && arg.back() == ')') arg.pop_back();
    if (!arg.empty()) {
      std::size_t pos = 0;
      long long n = 0;
      try {
        n = std::stoll(arg, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != arg.size() || n < 1) throw ConfigError("invalid fixed_block size in '" + std::string(text) + "'");
      out.fixed_block_size = static_cast<std::size_t>(n);
    }
  } else {
    throw ConfigError("unknown strategy '" + std::string(text) + "'");
  }
  return out;
}

bool SchedulingStrategy::adaptive_compilation() const {
  return kind == StrategyKind::veltair_ac || kind == StrategyKind::veltair_full;
}

bool SchedulingStrategy::adaptive_scheduling() const {
  return kind == StrategyKind::veltair_as || kind == StrategyKind::veltair_full;
}

ConflictOutcome apply_conflict(int requested, int available, const ConflictModel& model,
                               std::uint64_t draw_key) {
  if (available < 0) throw std::invalid_argument("available cores must be >= 0");
  if (requested <= available) return {requested, 0, false};
  Nanos overhead = model.per_conflict_overhead;
  if (model.stochastic) {
    // Log-normal with the configured median and mean.
    const double median = static_cast<double>(model.median_overhead);
    const double mean = static_cast<double>(model.per_conflict_overhead);
    const double sigma = std::sqrt(2.0 * std::log(std::max(mean / median, 1.0)));
    Rng rng(draw_key);
    overhead = static_cast<Nanos>(std::llround(median * std::exp(sigma * rng.normal())));
  }
  return {available, overhead, true};
}

std::optional<std::size_t> finding_first_pivot(std::span<const int> requirements, int thres, int avg_c) {
  for (std::size_t i = 0; i < requirements.size(); ++i) {
    if (requirements[i] >= thres + avg_c) return i;
  }
  return std::nullopt;
}

std::vector<int> dynamic_threshold(std::span<const int> avg_cores, int total_cores) {
  std::vector<int> thres(avg_cores.size(), 0);
  const long long sum = std::accumulate(avg_cores.begin(), avg_cores.end(), 0LL);
  const long long idle = total_cores - sum;
  if (avg_cores.empty() || sum <= 0 || idle <= 0) return thres;
  long long given = 0;
  for (std::size_t i = 0; i < avg_cores.size(); ++i) {
    thres[i] = static_cast<int>(idle * avg_cores[i] / sum);
    given += thres[i];
  }
  std::vector<std::size_t> order(avg_cores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return avg_cores[a] > avg_cores[b]; });
  for (std::size_t k = 0; given < idle; k = (k + 1) % order.size(), ++given) ++thres[order[k]];
  return thres;
}

std::size_t choose_variant(const LayerSpec& layer, double interference, int cores, const MachineSpec& machine) {
  std::size_t best = 0;
  double best_latency = latency(layer, layer.variants[0], cores, interference, machine);
  for (std::size_t i = 1; i < layer.variants.size(); ++i) {
    const double l = latency(layer, layer.variants[i], cores, interference, machine);
    const bool better = l < best_latency ||
                        (l == best_latency && layer.variants[i].block_size < layer.variants[best].block_size);
    if (better) {
      best = i;
      best_latency = l;
    }
  }
  return best;
}

LayerBlock PlannedBlock::to_layer_block(const ModelSpec& model) const {
  LayerBlock b;
  b.model_ref = model.model_id;
  b.layer_range = range;
  b.core_alloc = cores;
  b.block_qos = block_qos;
  b.overflow = overflow;
  for (std::size_t k = 0; k < variant_index.size(); ++k) {
    b.chosen_variant_per_layer.push_back(model.layers[range.begin + k].variants[variant_index[k]].variant_id);
  }
  return b;
}

double block_latency(const ModelSpec& model, LayerRange range, std::span<const std::size_t> variants,
                     int cores, double interference, const MachineSpec& machine) {
  double total = 0.0;
  for (std::size_t l = range.begin; l < range.end; ++l) {
    const auto& layer = model.layers[l];
    total += latency(layer, layer.variants[variants[l - range.begin]], cores, interference, machine);
  }
  return total;
}

namespace {

Nanos budget_of(const ModelSpec& model, LayerRange range) {
  Nanos b = 0;
  for (std::size_t l = range.begin; l < range.end; ++l) b += model.layers[l].qos_budget;
  return b;
}

// Fewest cores for the block, capped; re-picks versions at the final count.
void size_block(const ModelSpec& model, PlannedBlock& block, int cap, bool rechoose,
                const MachineSpec& machine) {
  const double I = block.planned_interference;
  const int need = min_cores_for(
      [&](int c) { return block_latency(model, block.range, block.variant_index, c, I, machine); },
      to_seconds(block.block_qos), machine);
  block.overflow = need > cap;
  block.cores = std::clamp(need, 1, cap);
  if (rechoose) {
    // Each layer's latency can only drop, so the budget still holds.
    for (std::size_t l = block.range.begin; l < block.range.end; ++l) {
      block.variant_index[l - block.range.begin] = choose_variant(model.layers[l], I, block.cores, machine);
    }
  }
}

int requirement(const LayerSpec& layer, std::size_t variant, double I, const MachineSpec& machine) {
  return min_core_requirement(layer, layer.variants[variant], I, machine);
}

}  // namespace

PlannedBlock worker_step(const ModelSpec& model, std::size_t begin, double interference, int thres,
                         const MachineSpec& machine) {
  if (begin >= model.layers.size()) throw std::out_of_range("no layers left to schedule");
  const int cap = std::min(machine.total_cores, model.avg_core + thres);
  const std::size_t n = model.layers.size();

  std::vector<std::size_t> choice;
  std::vector<int> reqs;
  for (std::size_t l = begin + 1; l < n; ++l) {
    choice.push_back(choose_variant(model.layers[l], interference, cap, machine));
    reqs.push_back(requirement(model.layers[l], choice.back(), interference, machine));
    if (reqs.back() >= model.avg_core + thres) break;
  }
  const auto pivot = finding_first_pivot(reqs, thres, model.avg_core);
  const std::size_t end = pivot ? begin + 1 + *pivot : n;

  PlannedBlock block;
  block.range = {begin, end};
  block.planned_interference = interference;
  block.block_qos = budget_of(model, block.range);
  block.variant_index.push_back(choose_variant(model.layers[begin], interference, cap, machine));
  for (std::size_t l = begin + 1; l < end; ++l) block.variant_index.push_back(choice[l - begin - 1]);
  size_block(model, block, cap, true, machine);
  return block;
}

std::vector<LayerBlock> form_layer_blocks(const ModelSpec& model, double interference, int thres,
                                          const MachineSpec& machine) {
  std::vector<LayerBlock> out;
  for (std::size_t begin = 0; begin < model.layers.size();) {
    const auto block = worker_step(model, begin, interference, thres, machine);
    out.push_back(block.to_layer_block(model));
    begin = block.range.end;
  }
  return out;
}

std::optional<std::size_t> finding_first_pivot(const ModelSpec& model, std::span<const std::size_t> variant_choice,
                                               double interference, int thres, const MachineSpec& machine) {
  std::vector<int> reqs;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    reqs.push_back(requirement(model.layers[l], variant_choice[l], interference, machine));
  }
  return finding_first_pivot(reqs, thres, model.avg_core);
}

bool soon_to_finish(Nanos start, Nanos predicted_end, Nanos now) {
  const Nanos total = predicted_end - start;
  const Nanos remaining = predicted_end - now;
  return 10 * remaining <= total;
}

PlannedBlock plan_block(const SchedulingStrategy& strategy, const ModelSpec& model, std::size_t begin,
                        double interference, int thres, const MachineSpec& machine) {
  const std::size_t n = model.layers.size();
  if (begin >= n) throw std::out_of_range("no layers left to schedule");
  PlannedBlock block;
  switch (strategy.kind) {
    case StrategyKind::veltair_as:
    case StrategyKind::veltair_full:
      return worker_step(model, begin, interference, thres, machine);

    case StrategyKind::model_wise_fcfs:
      block.range = {begin, n};
      block.block_qos = budget_of(model, block.range);
      for (std::size_t l = begin; l < n; ++l) {
        block.variant_index.push_back(choose_variant(model.layers[l], 0.0, model.avg_core, machine));
      }
      block.cores = model.avg_core;
      return block;

    case StrategyKind::layer_wise:
    case StrategyKind::fixed_block: {
      const std::size_t len = strategy.kind == StrategyKind::layer_wise ? 1 : strategy.fixed_block_size;
      block.range = {begin, std::min(n, begin + len)};
      block.block_qos = budget_of(model, block.range);
      for (std::size_t l = block.range.begin; l < block.range.end; ++l) {
        block.variant_index.push_back(choose_variant(model.layers[l], 0.0, machine.total_cores, machine));
      }
      size_block(model, block, machine.total_cores, false, machine);
      return block;
    }

    case StrategyKind::veltair_ac:
      // The baseline's model-wise allocation; only the versions follow I.
      block.range = {begin, n};
      block.block_qos = budget_of(model, block.range);
      block.planned_interference = interference;
      for (std::size_t l = begin; l < n; ++l) {
        block.variant_index.push_back(choose_variant(model.layers[l], interference, model.avg_core, machine));
      }
      block.cores = model.avg_core;
      return block;
  }
  return block;
}

}  // namespace veltair
