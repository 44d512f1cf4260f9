#include "veltair/compiler.h"

#include <limits>
#include <numeric>

namespace veltair {

ModelSpec apportion_qos(ModelSpec model) {
  if (model.qos <= 0) throw std::invalid_argument("model qos must be positive");
  if (model.layers.empty()) throw std::invalid_argument("model has no layers");
  double total = 0.0;
  for (const auto& l : model.layers) {
    if (!(l.op_count > 0.0)) {
      throw std::invalid_argument("layer " + std::to_string(l.layer_id) +
                                  ": op_count must be positive");
    }
    total += l.op_count;
  }
  Nanos assigned = 0;
  const double qos = static_cast<double>(model.qos);
  for (std::size_t i = 0; i + 1 < model.layers.size(); ++i) {
    auto& l = model.layers[i];
    l.qos_budget = static_cast<Nanos>(std::llround(qos * (l.op_count / total)));
    assigned += l.qos_budget;
  }
  model.layers.back().qos_budget = model.qos - assigned;
  return model;
}

std::vector<ScheduleSample> filter_by_qos(std::span<const ScheduleSample> samples,
                                          double budget_seconds) {
  if (!(budget_seconds > 0.0)) throw std::invalid_argument("budget must be positive");
  std::vector<ScheduleSample> out;
  for (const auto& s : samples) {
    if (s.solo_time <= budget_seconds) out.push_back(s);
  }
  return out;
}

std::vector<std::size_t> stride_indices(std::size_t n, std::size_t versions) {
  if (versions == 0) throw std::invalid_argument("version count must be >= 1");
  std::vector<std::size_t> out;
  if (n <= versions) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  const std::size_t step = std::max<std::size_t>(1, n / versions);
  for (std::size_t i = 0; i < n && out.size() < versions; i += step) out.push_back(i);
  return out;
}

std::vector<double> interference_levels() {
  std::vector<double> levels;
  for (int i = 1; i <= 10; ++i) levels.push_back(i / 10.0);
  return levels;
}

std::vector<double> interference_levels_with_solo() {
  auto levels = interference_levels();
  levels.insert(levels.begin(), 0.0);
  return levels;
}

std::vector<double> latency_envelope(std::span<const ImplVariant> versions,
                                     const SurfaceProbe& probe) {
  std::vector<double> env(probe.levels.size(), std::numeric_limits<double>::infinity());
  for (const auto& v : versions) {
    for (std::size_t k = 0; k < probe.levels.size(); ++k) {
      env[k] = std::min(env[k], latency(probe.op_count, v, probe.cores, probe.levels[k], probe.machine));
    }
  }
  return env;
}

namespace {

double loss_against(const std::vector<double>& env_subset, const std::vector<double>& env_ref) {
  double worst = 0.0;
  for (std::size_t k = 0; k < env_ref.size(); ++k) {
    worst = std::max(worst, 1.0 - env_ref[k] / env_subset[k]);
  }
  return worst;
}

std::vector<ImplVariant> without(std::span<const ImplVariant> set, std::size_t skip) {
  std::vector<ImplVariant> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i != skip) out.push_back(set[i]);
  }
  return out;
}

}  // namespace

double envelope_loss(std::span<const ImplVariant> subset, std::span<const ImplVariant> reference,
                     const SurfaceProbe& probe) {
  return loss_against(latency_envelope(subset, probe), latency_envelope(reference, probe));
}

std::vector<ImplVariant> prune_redundant(std::span<const ImplVariant> selected,
                                         const SurfaceProbe& probe, double keep_ratio) {
  if (probe.levels.empty()) throw std::invalid_argument("interference levels must not be empty");
  const auto full = latency_envelope(selected, probe);
  std::vector<ImplVariant> current(selected.begin(), selected.end());
  while (current.size() > 1) {
    std::size_t best = current.size();
    double best_ratio = -1.0;
    for (std::size_t i = 0; i < current.size(); ++i) {
      const auto env = latency_envelope(without(current, i), probe);
      double worst_ratio = 1.0;
      for (std::size_t k = 0; k < env.size(); ++k) worst_ratio = std::min(worst_ratio, full[k] / env[k]);
      if (worst_ratio >= keep_ratio && worst_ratio > best_ratio) {
        best = i;
        best_ratio = worst_ratio;
      }
    }
    if (best == current.size()) break;
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return current;
}

std::vector<double> nested_envelope_losses(std::span<const ImplVariant> dominant,
                                           const SurfaceProbe& probe) {
  const auto full = latency_envelope(dominant, probe);
  std::vector<bool> taken(dominant.size(), false);
  std::vector<ImplVariant> chosen;
  std::vector<double> losses;
  for (std::size_t round = 0; round < dominant.size(); ++round) {
    std::size_t best = dominant.size();
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dominant.size(); ++i) {
      if (taken[i]) continue;
      auto trial = chosen;
      trial.push_back(dominant[i]);
      const double l = loss_against(latency_envelope(trial, probe), full);
      if (l < best_loss) {
        best_loss = l;
        best = i;
      }
    }
    taken[best] = true;
    chosen.push_back(dominant[best]);
    losses.push_back(best_loss);
  }
  return losses;
}

int model_core_requirement(const ModelSpec& model, const MachineSpec& machine) {
  const double qos = to_seconds(model.qos);
  return min_cores_for(
      [&](int c) {
        double total = 0.0;
        for (const auto& layer : model.layers) {
          double best = std::numeric_limits<double>::infinity();
          for (const auto& v : layer.variants) best = std::min(best, latency(layer, v, c, 0.0, machine));
          total += best;
        }
        return total;
      },
      qos, machine);
}

namespace {

void sort_by_block_size(std::vector<ImplVariant>& vs) {
  std::stable_sort(vs.begin(), vs.end(), [](const ImplVariant& a, const ImplVariant& b) {
    return a.block_size < b.block_size;
  });
}

}  // namespace

CompiledModel compile_model(const ModelProfile& profile, const CompileOptions& options,
                            const GeneratorParams& params, const MachineSpec& machine) {
  if (options.versions == 0) throw ConfigError("versions must be >= 1");
  if (!(options.qos_headroom > 0.0 && options.qos_headroom <= 1.0))
    throw ConfigError("qos_headroom must be in (0, 1]");
  ModelSpec skeleton;
  skeleton.model_id = profile.model_id;
  skeleton.qos = from_seconds(profile.qos_seconds * options.qos_headroom);
  for (const auto& lp : profile.layers) {
    LayerSpec l;
    l.layer_id = lp.layer_id;
    l.op_count = lp.op_count;
    skeleton.layers.push_back(std::move(l));
  }
  skeleton = apportion_qos(std::move(skeleton));

  CompiledModel out;
  out.deadline = from_seconds(profile.qos_seconds);
  out.adaptive = skeleton;
  out.baseline = skeleton;
  for (std::size_t li = 0; li < profile.layers.size(); ++li) {
    const auto& lp = profile.layers[li];
    const double budget = to_seconds(skeleton.layers[li].qos_budget);
    const std::int64_t bs_max = max_block_size(lp.samples);

    CompiledLayerInfo info;
    auto feasible = filter_by_qos(lp.samples, budget);
    info.feasible_samples = feasible.size();
    if (feasible.empty()) {
      // Keep the single fastest sample so the layer stays schedulable.
      info.qos_infeasible_solo = true;
      auto fastest = std::min_element(lp.samples.begin(), lp.samples.end(),
                                      [](const auto& a, const auto& b) { return a.solo_time < b.solo_time; });
      feasible.push_back(*fastest);
    }

    const auto fastest = *std::min_element(feasible.begin(), feasible.end(),
                                           [](const auto& a, const auto& b) { return a.solo_time < b.solo_time; });
    const ImplVariant baseline = sample_to_variant(fastest, bs_max, params);

    for (const auto& s : extract_dominant(feasible)) info.dominant.push_back(sample_to_variant(s, bs_max, params));
    info.stride_selected = select_versions(info.dominant, options.versions);

    std::vector<ImplVariant> kept;
    if (options.versions == 1) {
      kept = {baseline};
    } else if (options.prune) {
      SurfaceProbe probe{lp.op_count, std::min(options.probe_cores, machine.total_cores),
                         options.probe_solo ? interference_levels_with_solo() : interference_levels(),
                         machine};
      auto candidates = info.stride_selected;
      const bool present = std::any_of(candidates.begin(), candidates.end(),
                                       [&](const ImplVariant& v) { return v.variant_id == baseline.variant_id; });
      if (options.keep_solo_fastest && !present) candidates.push_back(baseline);
      sort_by_block_size(candidates);
      kept = prune_redundant(candidates, probe, options.keep_ratio);
    } else {
      kept = info.stride_selected;
    }
    sort_by_block_size(kept);

    out.adaptive.layers[li].variants = std::move(kept);
    out.baseline.layers[li].variants = {baseline};
    out.info.push_back(std::move(info));
  }

  const int adaptive_req = model_core_requirement(out.adaptive, machine);
  const int baseline_req = model_core_requirement(out.baseline, machine);
  out.avg_core_clamped = adaptive_req > machine.total_cores || baseline_req > machine.total_cores;
  out.adaptive.avg_core = std::min(adaptive_req, machine.total_cores);
  out.baseline.avg_core = std::min(baseline_req, machine.total_cores);
  return out;
}

Universe compile_universe(const Profiles& profiles, const CompileOptions& options) {
  Universe u;
  for (const auto& mp : profiles.models) {
    u.push_back(compile_model(mp, options, profiles.config.params, profiles.config.machine));
  }
  return u;
}

}  // namespace veltair
