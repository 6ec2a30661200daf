#pragma once

#include "biasdet/model_config.hpp"
#include "biasdet/training.hpp"
#include "json.hpp"

// Strict JSON (de)serialization for config structs: unknown keys are
// rejected, field types enforced. Shared by the bundle writer and the
// command-line front end.
namespace biasdet {

nlohmann::json ngram_config_to_json(const NGramLinearConfig& cfg);
NGramLinearConfig ngram_config_from_json(const nlohmann::json& j);

nlohmann::json bilstm_config_to_json(const BiLstmConfig& cfg);
BiLstmConfig bilstm_config_from_json(const nlohmann::json& j);

nlohmann::json transformer_config_to_json(const TransformerConfig& cfg);
TransformerConfig transformer_config_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json_obj(const nlohmann::json& j);

nlohmann::json autotune_space_to_json(const AutotuneSpace& space);
AutotuneSpace autotune_space_from_json(const nlohmann::json& j);

}  // namespace biasdet
