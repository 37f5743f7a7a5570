#pragma once

#include <json.hpp>

#include "volsynth/model.hpp"

namespace volsynth {

nlohmann::json model_config_to_json(const model::ModelConfig& c);
// Missing keys keep the values of `defaults`.
model::ModelConfig model_config_from_json(const nlohmann::json& j,
                                          const model::ModelConfig& defaults = {});

}  // namespace volsynth
