#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "veltair/compiler.h"
#include "veltair/domain.h"
#include "veltair/engine.h"
#include "veltair/metrics.h"
#include "veltair/profile_gen.h"
#include "veltair/proxy.h"
#include "veltair/scheduler.h"

namespace veltair {

inline constexpr std::string_view kToolName = "veltair";
inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

/// Key order follows the struct declarations, so files diff cleanly.
using Json = nlohmann::ordered_json;

// Durations and instants are written as decimal seconds and read back to the
// nearest nanosecond. Every to_json/from_json pair round-trips exactly.

void to_json(Json& j, const ImplVariant& v);
void from_json(const Json& j, ImplVariant& v);
void to_json(Json& j, const LayerSpec& v);
void from_json(const Json& j, LayerSpec& v);
void to_json(Json& j, const ModelSpec& v);
void from_json(const Json& j, ModelSpec& v);
void to_json(Json& j, const LayerRange& v);
void from_json(const Json& j, LayerRange& v);
void to_json(Json& j, const LayerBlock& v);
void from_json(const Json& j, LayerBlock& v);
void to_json(Json& j, const CoreUpgrade& v);
void from_json(const Json& j, CoreUpgrade& v);
void to_json(Json& j, const BlockTrace& v);
void from_json(const Json& j, BlockTrace& v);
void to_json(Json& j, const Query& v);
void from_json(const Json& j, Query& v);

void to_json(Json& j, const MachineSpec& v);
void from_json(const Json& j, MachineSpec& v);
void to_json(Json& j, const CounterSnapshot& v);
void from_json(const Json& j, CounterSnapshot& v);

void to_json(Json& j, const GeneratorParams& v);
void from_json(const Json& j, GeneratorParams& v);
void to_json(Json& j, const ModelTemplate& v);
void from_json(const Json& j, ModelTemplate& v);
void to_json(Json& j, const UniverseConfig& v);
void from_json(const Json& j, UniverseConfig& v);
void to_json(Json& j, const ScheduleSample& v);
void from_json(const Json& j, ScheduleSample& v);
void to_json(Json& j, const LayerProfile& v);
void from_json(const Json& j, LayerProfile& v);
void to_json(Json& j, const ModelProfile& v);
void from_json(const Json& j, ModelProfile& v);

void to_json(Json& j, const CompileOptions& v);
void from_json(const Json& j, CompileOptions& v);
void to_json(Json& j, const CompiledLayerInfo& v);
void from_json(const Json& j, CompiledLayerInfo& v);
void to_json(Json& j, const CompiledModel& v);
void from_json(const Json& j, CompiledModel& v);

void to_json(Json& j, const LinearProxy& v);
void from_json(const Json& j, LinearProxy& v);

void to_json(Json& j, const SchedulingStrategy& v);
void from_json(const Json& j, SchedulingStrategy& v);
void to_json(Json& j, const ConflictModel& v);
void from_json(const Json& j, ConflictModel& v);

void to_json(Json& j, const MixMode& v);
void from_json(const Json& j, MixMode& v);
void to_json(Json& j, const WorkloadEntry& v);
void from_json(const Json& j, WorkloadEntry& v);
void to_json(Json& j, const WorkloadSpec& v);
void from_json(const Json& j, WorkloadSpec& v);
void to_json(Json& j, const SimOptions& v);
void from_json(const Json& j, SimOptions& v);
void to_json(Json& j, const CounterRecord& v);
void from_json(const Json& j, CounterRecord& v);
void to_json(Json& j, const ConflictRecord& v);
void from_json(const Json& j, ConflictRecord& v);
void to_json(Json& j, const SimResult& v);
void from_json(const Json& j, SimResult& v);

void to_json(Json& j, const QpsEstimate& v);

/// "explicit" or "inverse-qos" (underscores accepted). Throws ConfigError.
MixMode parse_mix_mode(std::string_view text);
std::string mix_mode_name(MixMode mode);

/// {"name": ..., "version": ...}
Json tool_info();

/// Parses JSON text, turning library parse errors into ConfigError with `what`
/// as context.
Json parse_json(std::string_view text, std::string_view what);

/// Converts `j` into T, rethrowing nlohmann type/key errors as ConfigError.
template <typename T>
T decode(const Json& j, std::string_view what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

/// Throws ConfigError on a missing or different schema_version, or a `kind`
/// other than `expected_kind`.
void check_header(const Json& j, std::string_view expected_kind, std::string_view what);

/// Every key of `overlay` must exist in `reference` (recursively through
/// objects); throws ConfigError naming the first unknown key path.
void check_known_keys(const Json& reference, const Json& overlay, const std::string& path = "");

std::string read_file(const std::string& path);
/// Writes atomically enough for a desk tool: full content, then flush.
/// Throws ConfigError when the path cannot be opened or written.
void write_file(const std::string& path, std::string_view content);

/// Pretty-printed with a trailing newline.
std::string dump(const Json& j);

/// 64-bit FNV-1a, 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace veltair
