#pragma once

// JSON, WAV and CSV interchange formats.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "roomest/acoustic_model.hpp"
#include "roomest/geometry_estimator.hpp"
#include "roomest/pulse_extraction.hpp"
#include "roomest/reflection_classifier.hpp"

namespace roomest {

using json = nlohmann::json;

void to_json(json& j, const RoomConfig& config);
void from_json(const json& j, RoomConfig& config);

void to_json(json& j, const Pulse& pulse);
void from_json(const json& j, Pulse& pulse);

void to_json(json& j, const PathEntry& entry);
void from_json(const json& j, PathEntry& entry);

json path_set_to_json(const PathLengthSet& set);

json classification_to_json(const ClassifiedReflections& cls);

/// RoomConfig keys plus a "diagnostics" object.
json estimate_to_json(const RoomEstimate& estimate);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

RoomConfig read_room_config(const std::filesystem::path& path);
PulseList read_pulse_list(const std::filesystem::path& path);

/// Mono IEEE-float 32-bit WAV.
void write_wav(const std::filesystem::path& path, const SampledRir& rir);
SampledRir read_wav(const std::filesystem::path& path);

/// One sample per line; fs goes to a sidecar "<path>.json" as {"fs": ...}.
void write_csv(const std::filesystem::path& path, const SampledRir& rir);
/// fs_override > 0 wins over the sidecar.
SampledRir read_csv(const std::filesystem::path& path, double fs_override = 0.0);

}  // namespace roomest
