#pragma once

#include <nlohmann/json.hpp>

#include "emostress/features.hpp"
#include "emostress/model.hpp"

namespace emostress {

// Missing keys keep their defaults; unknown keys raise InvalidConfig.
void to_json(nlohmann::json& j, const FeatureConfig& cfg);
void from_json(const nlohmann::json& j, FeatureConfig& cfg);
void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known, std::string_view where);

}  // namespace emostress
