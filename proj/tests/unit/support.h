#pragma once

#include <string>
#include <vector>

#include "veltair/cli.h"
#include "veltair/compiler.h"
#include "veltair/engine.h"
#include "veltair/metrics.h"
#include "veltair/profile_gen.h"
#include "veltair/proxy.h"

namespace veltair::testing {

/// Default-config universe, generated and compiled once per process.
struct Shipped {
  Profiles profiles;
  Universe universe;
  LinearProxy proxy;
  SimOptions options;
};

inline const Shipped& shipped() {
  static const Shipped s = [] {
    Shipped out;
    out.profiles = generate_profiles(UniverseConfig{});
    out.universe = compile_universe(out.profiles, CompileOptions{});
    out.proxy = fit(calibration_trace(out.universe, out.profiles.config.machine, 10000, 7));
    out.options.proxy = out.proxy;
    out.options.record_counters = false;
    return out;
  }();
  return s;
}

inline const CompiledModel& shipped_model(const std::string& id) {
  for (const auto& m : shipped().universe) {
    if (m.adaptive.model_id == id) return m;
  }
  throw std::out_of_range(id);
}

inline ImplVariant make_variant(std::string id, std::int64_t bs, std::int64_t par, double flops, double serial,
                                double sens, double bw = 0.5) {
  ImplVariant v;
  v.variant_id = std::move(id);
  v.block_size = bs;
  v.parallelism = par;
  v.solo_flops = flops;
  v.serial_fraction = serial;
  v.interference_sensitivity = sens;
  v.bandwidth_factor = bw;
  return v;
}

/// A model whose layers each carry the given variants, budgets apportioned
/// from `qos_seconds`.
inline ModelSpec make_model(std::string id, const std::vector<double>& ops, double qos_seconds,
                            const std::vector<ImplVariant>& variants, int avg_core) {
  ModelSpec m;
  m.model_id = std::move(id);
  m.qos = from_seconds(qos_seconds);
  m.avg_core = avg_core;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    LayerSpec l;
    l.layer_id = i;
    l.op_count = ops[i];
    l.variants = variants;
    m.layers.push_back(l);
  }
  return apportion_qos(m);
}

/// Wraps one spec as both views of a compiled model.
inline CompiledModel as_compiled(const ModelSpec& spec, double deadline_seconds) {
  CompiledModel c;
  c.adaptive = spec;
  c.baseline = spec;
  c.deadline = from_seconds(deadline_seconds);
  c.info.resize(spec.layers.size());
  return c;
}

}  // namespace veltair::testing
