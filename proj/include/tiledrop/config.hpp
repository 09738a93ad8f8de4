#pragma once

#include "tiledrop/detector.hpp"
#include "tiledrop/downstream.hpp"
#include "tiledrop/trainer.hpp"
#include "tiledrop/worldgen.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>

namespace tiledrop {

// JSON mappings for the config blocks. Unknown keys are rejected so typos
// surface as ConfigError instead of silently using defaults.
nlohmann::ordered_json to_json(const GenConfig& cfg);
GenConfig gen_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const DetectorConfig& cfg);
DetectorConfig detector_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const GbdtParams& p);
GbdtParams gbdt_params_from_json(const nlohmann::json& j);

// CRC-32 of a byte string, as 8 lowercase hex digits.
std::string crc32_hex(const std::string& bytes);

// Parses text, wrapping parse failures in ConfigError.
nlohmann::json parse_config_text(const std::string& text);

}  // namespace tiledrop
