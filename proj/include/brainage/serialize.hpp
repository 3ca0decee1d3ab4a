#pragma once

// JSON forms of every configuration and report. All documents carry a
// top-level "version"; readers reject unknown or mistyped fields with a
// ConfigError naming the offending field path.

#include <cstdint>
#include <string>

#include "json.hpp"

#include "brainage/data.hpp"
#include "brainage/losses.hpp"
#include "brainage/metrics.hpp"
#include "brainage/model.hpp"
#include "brainage/trainer.hpp"

namespace brainage {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "brainage 1.0.0";

Json to_json(const LossConfig& c);
LossConfig loss_config_from_json(const Json& j, const std::string& path = "loss");

Json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j, const std::string& path = "model");

/// {version, config, layers: [{weights: row-major, bias}]}
Json to_json(const MlpParams& p);
MlpParams params_from_json(const Json& j, const std::string& path = "model");

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j, const std::string& path = "train");

Json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const Json& j, const std::string& path = "synth");

Json to_json(const SeverityConfig& c);

Json to_json(const TrainHistory& h, bool include_wall_time);
Json to_json(const MetricsReport& r);
Json to_json(const GroupReport& r);

/// FNV-1a 64 of the compact dump, as 16 hex digits.
std::string config_hash(const Json& j);

Json read_json_file(const std::string& path);
/// Pretty-printed with a trailing newline.
void write_json_file(const std::string& path, const Json& j);

}  // namespace brainage
