#include "veltair/io.h"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace veltair {

namespace {

double secs(Nanos ns) { return to_seconds(ns); }
Nanos nanos(const Json& j) { return from_seconds(j.get<double>()); }

std::vector<double> secs(const std::vector<Nanos>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (auto ns : v) out.push_back(to_seconds(ns));
  return out;
}

std::vector<Nanos> nanos_list(const Json& j) {
  std::vector<Nanos> out;
  for (const auto& x : j) out.push_back(from_seconds(x.get<double>()));
  return out;
}

}  // namespace

void to_json(Json& j, const ImplVariant& v) {
  j = Json{{"variant_id", v.variant_id},
           {"block_size", v.block_size},
           {"parallelism", v.parallelism},
           {"solo_flops", v.solo_flops},
           {"serial_fraction", v.serial_fraction},
           {"interference_sensitivity", v.interference_sensitivity},
           {"bandwidth_factor", v.bandwidth_factor}};
}

void from_json(const Json& j, ImplVariant& v) {
  j.at("variant_id").get_to(v.variant_id);
  j.at("block_size").get_to(v.block_size);
  j.at("parallelism").get_to(v.parallelism);
  j.at("solo_flops").get_to(v.solo_flops);
  j.at("serial_fraction").get_to(v.serial_fraction);
  j.at("interference_sensitivity").get_to(v.interference_sensitivity);
  j.at("bandwidth_factor").get_to(v.bandwidth_factor);
}

void to_json(Json& j, const LayerSpec& v) {
  j = Json{{"layer_id", v.layer_id}, {"op_count", v.op_count}, {"qos_budget", secs(v.qos_budget)},
           {"variants", v.variants}};
}

void from_json(const Json& j, LayerSpec& v) {
  j.at("layer_id").get_to(v.layer_id);
  j.at("op_count").get_to(v.op_count);
  v.qos_budget = nanos(j.at("qos_budget"));
  j.at("variants").get_to(v.variants);
}

void to_json(Json& j, const ModelSpec& v) {
  j = Json{{"model_id", v.model_id}, {"qos", secs(v.qos)}, {"avg_core", v.avg_core}, {"layers", v.layers}};
}

void from_json(const Json& j, ModelSpec& v) {
  j.at("model_id").get_to(v.model_id);
  v.qos = nanos(j.at("qos"));
  j.at("avg_core").get_to(v.avg_core);
  j.at("layers").get_to(v.layers);
}

void to_json(Json& j, const LayerRange& v) { j = Json::array({v.begin, v.end}); }

void from_json(const Json& j, LayerRange& v) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("layer range must be [begin, end]");
  j[0].get_to(v.begin);
  j[1].get_to(v.end);
}

void to_json(Json& j, const LayerBlock& v) {
  j = Json{{"model_ref", v.model_ref},
           {"layer_range", v.layer_range},
           {"core_alloc", v.core_alloc},
           {"block_qos", secs(v.block_qos)},
           {"chosen_variant_per_layer", v.chosen_variant_per_layer},
           {"overflow", v.overflow}};
}

void from_json(const Json& j, LayerBlock& v) {
  j.at("model_ref").get_to(v.model_ref);
  j.at("layer_range").get_to(v.layer_range);
  j.at("core_alloc").get_to(v.core_alloc);
  v.block_qos = nanos(j.at("block_qos"));
  j.at("chosen_variant_per_layer").get_to(v.chosen_variant_per_layer);
  j.at("overflow").get_to(v.overflow);
}

void to_json(Json& j, const CoreUpgrade& v) {
  j = Json{{"time", secs(v.time)}, {"cores", v.cores}, {"layer", v.layer}};
}

void from_json(const Json& j, CoreUpgrade& v) {
  v.time = nanos(j.at("time"));
  j.at("cores").get_to(v.cores);
  j.at("layer").get_to(v.layer);
}

void to_json(Json& j, const BlockTrace& v) {
  j = Json{{"layers", v.layers},
           {"variant_index", v.variant_index},
           {"start", secs(v.start)},
           {"end", secs(v.end)},
           {"requested_cores", v.requested_cores},
           {"cores", v.cores},
           {"interference_at_start", v.interference_at_start},
           {"planned_interference", v.planned_interference},
           {"overhead", secs(v.overhead)},
           {"conflicted", v.conflicted},
           {"overflow", v.overflow},
           {"upgrades", v.upgrades},
           {"layer_interference", v.layer_interference},
           {"layer_end", secs(v.layer_end)}};
}

void from_json(const Json& j, BlockTrace& v) {
  j.at("layers").get_to(v.layers);
  j.at("variant_index").get_to(v.variant_index);
  v.start = nanos(j.at("start"));
  v.end = nanos(j.at("end"));
  j.at("requested_cores").get_to(v.requested_cores);
  j.at("cores").get_to(v.cores);
  j.at("interference_at_start").get_to(v.interference_at_start);
  j.at("planned_interference").get_to(v.planned_interference);
  v.overhead = nanos(j.at("overhead"));
  j.at("conflicted").get_to(v.conflicted);
  j.at("overflow").get_to(v.overflow);
  j.at("upgrades").get_to(v.upgrades);
  j.at("layer_interference").get_to(v.layer_interference);
  v.layer_end = nanos_list(j.at("layer_end"));
}

void to_json(Json& j, const Query& v) {
  j = Json{{"query_id", v.query_id},
           {"model_id", v.model_id},
           {"arrival_time", secs(v.arrival_time)},
           {"deadline", secs(v.deadline)},
           {"finish_time", v.finish_time ? Json(secs(*v.finish_time)) : Json(nullptr)},
           {"per_block_trace", v.per_block_trace}};
}

void from_json(const Json& j, Query& v) {
  j.at("query_id").get_to(v.query_id);
  j.at("model_id").get_to(v.model_id);
  v.arrival_time = nanos(j.at("arrival_time"));
  v.deadline = nanos(j.at("deadline"));
  const auto& f = j.at("finish_time");
  v.finish_time = f.is_null() ? std::nullopt : std::optional<Nanos>(nanos(f));
  j.at("per_block_trace").get_to(v.per_block_trace);
}

void to_json(Json& j, const MachineSpec& v) {
  j = Json{{"total_cores", v.total_cores},
           {"l3_capacity", v.l3_capacity},
           {"peak_flops_per_core", v.peak_flops_per_core}};
}

void from_json(const Json& j, MachineSpec& v) {
  j.at("total_cores").get_to(v.total_cores);
  j.at("l3_capacity").get_to(v.l3_capacity);
  j.at("peak_flops_per_core").get_to(v.peak_flops_per_core);
}

void to_json(Json& j, const CounterSnapshot& v) {
  j = Json{{"l3_access_rate", v.l3_access_rate}, {"l3_miss_rate", v.l3_miss_rate}, {"timestamp", v.timestamp}};
}

void from_json(const Json& j, CounterSnapshot& v) {
  j.at("l3_access_rate").get_to(v.l3_access_rate);
  j.at("l3_miss_rate").get_to(v.l3_miss_rate);
  j.at("timestamp").get_to(v.timestamp);
}

void to_json(Json& j, const GeneratorParams& v) {
  j = Json{{"kappa", v.kappa},
           {"min_block_size", v.min_block_size},
           {"max_block_size", v.max_block_size},
           {"max_parallelism", v.max_parallelism},
           {"reference_cores", v.reference_cores},
           {"locality_exponent", v.locality_exponent},
           {"search_noise_max", v.search_noise_max},
           {"bandwidth_factor_min", v.bandwidth_factor_min},
           {"bandwidth_factor_max", v.bandwidth_factor_max},
           {"frontier_depth", v.frontier_depth},
           {"heavy_efficiency", v.heavy_efficiency},
           {"heavy_serial_fraction", v.heavy_serial_fraction},
           {"light_serial_fraction", v.light_serial_fraction},
           {"serial_parallel_span", v.serial_parallel_span},
           {"leader_efficiency", v.leader_efficiency},
           {"leader_op_weight", v.leader_op_weight},
           {"light_op_weight", v.light_op_weight},
           {"layer_jitter", v.layer_jitter},
           {"stage_jitter", v.stage_jitter}};
}

void from_json(const Json& j, GeneratorParams& v) {
  j.at("kappa").get_to(v.kappa);
  j.at("min_block_size").get_to(v.min_block_size);
  j.at("max_block_size").get_to(v.max_block_size);
  j.at("max_parallelism").get_to(v.max_parallelism);
  j.at("reference_cores").get_to(v.reference_cores);
  j.at("locality_exponent").get_to(v.locality_exponent);
  j.at("search_noise_max").get_to(v.search_noise_max);
  j.at("bandwidth_factor_min").get_to(v.bandwidth_factor_min);
  j.at("bandwidth_factor_max").get_to(v.bandwidth_factor_max);
  j.at("frontier_depth").get_to(v.frontier_depth);
  j.at("heavy_efficiency").get_to(v.heavy_efficiency);
  j.at("heavy_serial_fraction").get_to(v.heavy_serial_fraction);
  j.at("light_serial_fraction").get_to(v.light_serial_fraction);
  j.at("serial_parallel_span").get_to(v.serial_parallel_span);
  j.at("leader_efficiency").get_to(v.leader_efficiency);
  j.at("leader_op_weight").get_to(v.leader_op_weight);
  j.at("light_op_weight").get_to(v.light_op_weight);
  j.at("layer_jitter").get_to(v.layer_jitter);
  j.at("stage_jitter").get_to(v.stage_jitter);
}

void to_json(Json& j, const ModelTemplate& v) {
  j = Json{{"name", v.name},
           {"qos_seconds", v.qos_seconds},
           {"n_layers", v.n_layers},
           {"total_flop", v.total_flop},
           {"hard_layers", v.hard_layers},
           {"hard_probability", v.hard_probability},
           {"stage_pattern", v.stage_pattern}};
}

void from_json(const Json& j, ModelTemplate& v) {
  j.at("name").get_to(v.name);
  j.at("qos_seconds").get_to(v.qos_seconds);
  j.at("n_layers").get_to(v.n_layers);
  j.at("total_flop").get_to(v.total_flop);
  j.at("hard_layers").get_to(v.hard_layers);
  j.at("hard_probability").get_to(v.hard_probability);
  j.at("stage_pattern").get_to(v.stage_pattern);
}

void to_json(Json& j, const UniverseConfig& v) {
  j = Json{{"seed", v.seed},
           {"samples_per_layer", v.samples_per_layer},
           {"machine", v.machine},
           {"params", v.params},
           {"models", v.models}};
}

void from_json(const Json& j, UniverseConfig& v) {
  j.at("seed").get_to(v.seed);
  j.at("samples_per_layer").get_to(v.samples_per_layer);
  j.at("machine").get_to(v.machine);
  j.at("params").get_to(v.params);
  j.at("models").get_to(v.models);
}

void to_json(Json& j, const ScheduleSample& v) {
  j = Json::array({v.block_size, v.parallelism, v.search_noise, v.solo_time, v.solo_flops, v.serial_fraction,
                   v.bandwidth_factor});
}

void from_json(const Json& j, ScheduleSample& v) {
  if (!j.is_array() || j.size() != 7) throw ConfigError("sample must be a 7-element array");
  j[0].get_to(v.block_size);
  j[1].get_to(v.parallelism);
  j[2].get_to(v.search_noise);
  j[3].get_to(v.solo_time);
  j[4].get_to(v.solo_flops);
  j[5].get_to(v.serial_fraction);
  j[6].get_to(v.bandwidth_factor);
}

void to_json(Json& j, const LayerProfile& v) {
  j = Json{{"layer_id", v.layer_id},
           {"op_count", v.op_count},
           {"shape_seed", v.shape_seed},
           {"conflict_prone", v.conflict_prone},
           {"stage_demand", v.stage_demand},
           {"samples", v.samples}};
}

void from_json(const Json& j, LayerProfile& v) {
  j.at("layer_id").get_to(v.layer_id);
  j.at("op_count").get_to(v.op_count);
  j.at("shape_seed").get_to(v.shape_seed);
  j.at("conflict_prone").get_to(v.conflict_prone);
  j.at("stage_demand").get_to(v.stage_demand);
  j.at("samples").get_to(v.samples);
}

void to_json(Json& j, const ModelProfile& v) {
  j = Json{{"model_id", v.model_id}, {"qos_seconds", v.qos_seconds}, {"layers", v.layers}};
}

void from_json(const Json& j, ModelProfile& v) {
  j.at("model_id").get_to(v.model_id);
  j.at("qos_seconds").get_to(v.qos_seconds);
  j.at("layers").get_to(v.layers);
}

void to_json(Json& j, const CompileOptions& v) {
  j = Json{{"versions", v.versions},
           {"keep_ratio", v.keep_ratio},
           {"probe_cores", v.probe_cores},
           {"prune", v.prune},
           {"probe_solo", v.probe_solo},
           {"keep_solo_fastest", v.keep_solo_fastest},
           {"qos_headroom", v.qos_headroom}};
}

void from_json(const Json& j, CompileOptions& v) {
  j.at("versions").get_to(v.versions);
  j.at("keep_ratio").get_to(v.keep_ratio);
  j.at("probe_cores").get_to(v.probe_cores);
  j.at("prune").get_to(v.prune);
  j.at("probe_solo").get_to(v.probe_solo);
  j.at("keep_solo_fastest").get_to(v.keep_solo_fastest);
  j.at("qos_headroom").get_to(v.qos_headroom);
}

void to_json(Json& j, const CompiledLayerInfo& v) {
  j = Json{{"qos_infeasible_solo", v.qos_infeasible_solo},
           {"feasible_samples", v.feasible_samples},
           {"dominant", v.dominant},
           {"stride_selected", v.stride_selected}};
}

void from_json(const Json& j, CompiledLayerInfo& v) {
  j.at("qos_infeasible_solo").get_to(v.qos_infeasible_solo);
  j.at("feasible_samples").get_to(v.feasible_samples);
  j.at("dominant").get_to(v.dominant);
  j.at("stride_selected").get_to(v.stride_selected);
}

void to_json(Json& j, const CompiledModel& v) {
  j = Json{{"model_id", v.adaptive.model_id},
           {"deadline", secs(v.deadline)},
           {"avg_core_clamped", v.avg_core_clamped},
           {"adaptive", v.adaptive},
           {"baseline", v.baseline},
           {"info", v.info}};
}

void from_json(const Json& j, CompiledModel& v) {
  v.deadline = nanos(j.at("deadline"));
  j.at("avg_core_clamped").get_to(v.avg_core_clamped);
  j.at("adaptive").get_to(v.adaptive);
  j.at("baseline").get_to(v.baseline);
  j.at("info").get_to(v.info);
}

void to_json(Json& j, const LinearProxy& v) {
  j = Json{{"a0", v.a0}, {"a1", v.a1}, {"a2", v.a2}, {"r2", v.r2}};
}

void from_json(const Json& j, LinearProxy& v) {
  j.at("a0").get_to(v.a0);
  j.at("a1").get_to(v.a1);
  j.at("a2").get_to(v.a2);
  j.at("r2").get_to(v.r2);
}

void to_json(Json& j, const SchedulingStrategy& v) { j = v.name(); }

void from_json(const Json& j, SchedulingStrategy& v) { v = SchedulingStrategy::parse(j.get<std::string>()); }

void to_json(Json& j, const ConflictModel& v) {
  j = Json{{"per_conflict_overhead", secs(v.per_conflict_overhead)},
           {"stochastic", v.stochastic},
           {"median_overhead", secs(v.median_overhead)},
           {"forced_rate", v.forced_rate ? Json(*v.forced_rate) : Json(nullptr)}};
}

void from_json(const Json& j, ConflictModel& v) {
  v.per_conflict_overhead = nanos(j.at("per_conflict_overhead"));
  j.at("stochastic").get_to(v.stochastic);
  v.median_overhead = nanos(j.at("median_overhead"));
  const auto& f = j.at("forced_rate");
  v.forced_rate = f.is_null() ? std::nullopt : std::optional<double>(f.get<double>());
}

MixMode parse_mix_mode(std::string_view text) {
  std::string s;
  for (char c : text) s.push_back(c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "explicit") return MixMode::explicit_rates;
  if (s == "inverse-qos") return MixMode::inverse_qos;
  throw ConfigError("unknown mix mode '" + std::string(text) + "' (expected explicit or inverse-qos)");
}

std::string mix_mode_name(MixMode mode) { return mode == MixMode::inverse_qos ? "inverse-qos" : "explicit"; }

void to_json(Json& j, const MixMode& v) { j = mix_mode_name(v); }

void from_json(const Json& j, MixMode& v) { v = parse_mix_mode(j.get<std::string>()); }

void to_json(Json& j, const WorkloadEntry& v) { j = Json{{"model_id", v.model_id}, {"rate", v.rate}}; }

void from_json(const Json& j, WorkloadEntry& v) {
  j.at("model_id").get_to(v.model_id);
  j.at("rate").get_to(v.rate);
}

void to_json(Json& j, const WorkloadSpec& v) {
  j = Json{{"entries", v.entries}, {"duration", v.duration}, {"rng_seed", v.rng_seed}, {"mix", v.mix_mode}};
}

void from_json(const Json& j, WorkloadSpec& v) {
  j.at("entries").get_to(v.entries);
  j.at("duration").get_to(v.duration);
  j.at("rng_seed").get_to(v.rng_seed);
  j.at("mix").get_to(v.mix_mode);
}

void to_json(Json& j, const SimOptions& v) {
  j = Json{{"machine", v.machine},
           {"conflict", v.conflict},
           {"proxy", v.proxy},
           {"sample_period", secs(v.sample_period)},
           {"warmup_fraction", v.warmup_fraction},
           {"record_counters", v.record_counters}};
}

void from_json(const Json& j, SimOptions& v) {
  j.at("machine").get_to(v.machine);
  j.at("conflict").get_to(v.conflict);
  j.at("proxy").get_to(v.proxy);
  v.sample_period = nanos(j.at("sample_period"));
  j.at("warmup_fraction").get_to(v.warmup_fraction);
  j.at("record_counters").get_to(v.record_counters);
}

void to_json(Json& j, const CounterRecord& v) {
  j = Json{{"snapshot", v.snapshot}, {"interference", v.interference}};
}

void from_json(const Json& j, CounterRecord& v) {
  j.at("snapshot").get_to(v.snapshot);
  j.at("interference").get_to(v.interference);
}

void to_json(Json& j, const ConflictRecord& v) {
  j = Json{{"time", secs(v.time)},   {"query_id", v.query_id}, {"block", v.block},
           {"requested", v.requested}, {"granted", v.granted},   {"overhead", secs(v.overhead)}};
}

void from_json(const Json& j, ConflictRecord& v) {
  v.time = nanos(j.at("time"));
  j.at("query_id").get_to(v.query_id);
  j.at("block").get_to(v.block);
  j.at("requested").get_to(v.requested);
  j.at("granted").get_to(v.granted);
  v.overhead = nanos(j.at("overhead"));
}

void to_json(Json& j, const SimResult& v) {
  j = Json{{"strategy", v.strategy},
           {"seed", v.seed},
           {"workload", v.workload},
           {"options", v.options},
           {"allocation_events", v.allocation_events},
           {"end_time", secs(v.end_time)},
           {"window_begin", secs(v.window_begin)},
           {"window_end", secs(v.window_end)},
           {"queries", v.queries},
           {"conflicts", v.conflicts},
           {"counters", v.counters}};
}

void from_json(const Json& j, SimResult& v) {
  j.at("strategy").get_to(v.strategy);
  j.at("seed").get_to(v.seed);
  j.at("workload").get_to(v.workload);
  j.at("options").get_to(v.options);
  j.at("allocation_events").get_to(v.allocation_events);
  v.end_time = nanos(j.at("end_time"));
  v.window_begin = nanos(j.at("window_begin"));
  v.window_end = nanos(j.at("window_end"));
  j.at("queries").get_to(v.queries);
  j.at("conflicts").get_to(v.conflicts);
  j.at("counters").get_to(v.counters);
}

void to_json(Json& j, const QpsEstimate& v) {
  Json points = Json::array();
  for (const auto& p : v.points) points.push_back(Json{{"lambda", p.lambda}, {"satisfaction", p.satisfaction}});
  j = Json{{"lambda_star", v.lambda_star}, {"low", v.low},
           {"high", v.high},               {"unsaturated", v.unsaturated},
           {"below_range", v.below_range}, {"non_monotone", v.non_monotone},
           {"points", points}};
}

Json tool_info() { return Json{{"name", kToolName}, {"version", kToolVersion}}; }

Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

void check_header(const Json& j, std::string_view expected_kind, std::string_view what) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw ConfigError(std::string(what) + ": missing schema_version");
  }
  if (j["schema_version"] != kSchemaVersion) {
    throw ConfigError(std::string(what) + ": unsupported schema_version " + j["schema_version"].dump());
  }
  if (!j.contains("kind") || j["kind"] != expected_kind) {
    throw ConfigError(std::string(what) + ": expected a " + std::string(expected_kind) + " file");
  }
}

void check_known_keys(const Json& reference, const Json& overlay, const std::string& path) {
  if (!reference.is_object() || !overlay.is_object()) return;
  for (const auto& [key, value] : overlay.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw ConfigError("unknown config key '" + here + "'");
    check_known_keys(reference[key], value, here);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

std::string dump(const Json& j) { return j.dump(1) + "\n"; }

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace veltair
