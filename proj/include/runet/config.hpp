#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>

#include "runet/model.hpp"
#include "runet/train.hpp"

namespace runet {

/// Fields absent from `j` keep the value in `base`. Unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base);

nlohmann::ordered_json to_json(const ModelConfig& c);
nlohmann::ordered_json to_json(const TrainConfig& c);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace runet
