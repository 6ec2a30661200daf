#include "config_json.hpp"

#include "biasdet/errors.hpp"

namespace biasdet {

namespace {

[[noreturn]] void bad_field(const std::string& context,
                            const nlohmann::json::exception& e) {
  throw FormatError(context + ": bad field: " + e.what());
}

}  // namespace

nlohmann::json ngram_config_to_json(const NGramLinearConfig& cfg) {
  return {{"buckets", cfg.buckets}, {"dim", cfg.dim}, {"n_max", cfg.n_max}};
}

NGramLinearConfig ngram_config_from_json(const nlohmann::json& j) {
  NGramLinearConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "buckets") {
        cfg.buckets = value.get<int>();
      } else if (key == "dim") {
        cfg.dim = value.get<int>();
      } else if (key == "n_max") {
        cfg.n_max = value.get<int>();
      } else {
        throw ConfigError("ngram config: unknown key " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    bad_field("ngram config", e);
  }
  return cfg;
}

nlohmann::json bilstm_config_to_json(const BiLstmConfig& cfg) {
  return {{"layers", cfg.layers},
          {"hidden", cfg.hidden},
          {"input_dropout", cfg.input_dropout},
          {"recurrent_dropout", cfg.recurrent_dropout},
          {"embedding_dim", cfg.embedding_dim},
          {"embedding_source", cfg.embedding_source}};
}

BiLstmConfig bilstm_config_from_json(const nlohmann::json& j) {
  BiLstmConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "layers") {
        cfg.layers = value.get<int>();
      } else if (key == "hidden") {
        cfg.hidden = value.get<int>();
      } else if (key == "input_dropout") {
        cfg.input_dropout = value.get<double>();
      } else if (key == "recurrent_dropout") {
        cfg.recurrent_dropout = value.get<double>();
      } else if (key == "embedding_dim") {
        cfg.embedding_dim = value.get<int>();
      } else if (key == "embedding_source") {
        cfg.embedding_source = value.get<std::string>();
      } else {
        throw ConfigError("bilstm config: unknown key " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    bad_field("bilstm config", e);
  }
  return cfg;
}

nlohmann::json transformer_config_to_json(const TransformerConfig& cfg) {
  return {{"layers", cfg.layers},
          {"hidden", cfg.hidden},
          {"heads", cfg.heads},
          {"ffn", cfg.ffn},
          {"vocab_size", cfg.vocab_size},
          {"embedding_size", cfg.embedding_size},
          {"max_positions", cfg.max_positions},
          {"cross_layer_sharing", cfg.cross_layer_sharing},
          {"factorized_embedding", cfg.factorized_embedding},
          {"preset", cfg.preset}};
}

TransformerConfig transformer_config_from_json(const nlohmann::json& j) {
  TransformerConfig cfg;
  std::string preset = "custom";
  try {
    if (j.contains("preset")) preset = j.at("preset").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    bad_field("transformer config", e);
  }
  if (preset == "custom") {
    cfg.preset = "custom";
  } else {
    cfg = transformer_preset(preset);
  }
  bool explicit_embedding_size = false;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "preset") {
        // applied above
      } else if (key == "layers") {
        cfg.layers = value.get<int>();
      } else if (key == "hidden") {
        cfg.hidden = value.get<int>();
      } else if (key == "heads") {
        cfg.heads = value.get<int>();
      } else if (key == "ffn") {
        cfg.ffn = value.get<int>();
      } else if (key == "vocab_size") {
        cfg.vocab_size = value.get<int>();
      } else if (key == "embedding_size") {
        cfg.embedding_size = value.get<int>();
        explicit_embedding_size = true;
      } else if (key == "max_positions") {
        cfg.max_positions = value.get<int>();
      } else if (key == "cross_layer_sharing") {
        cfg.cross_layer_sharing = value.get<bool>();
      } else if (key == "factorized_embedding") {
        cfg.factorized_embedding = value.get<bool>();
      } else {
        throw ConfigError("transformer config: unknown key " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    bad_field("transformer config", e);
  }
  // The embedding width only differs from the hidden width under
  // factorization, so it tracks `hidden` unless set explicitly.
  if (!explicit_embedding_size && !cfg.factorized_embedding) {
    cfg.embedding_size = cfg.hidden;
  }
  return cfg;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"weight_decay", cfg.weight_decay},
          {"max_seq_len", cfg.max_seq_len},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"warmup_fraction", cfg.warmup_fraction},
          {"clip_norm", cfg.clip_norm},
          {"seed", cfg.seed},
          {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},
          {"adam_eps", cfg.adam_eps}};
}

TrainConfig train_config_from_json_obj(const nlohmann::json& j) {
  TrainConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate") {
        cfg.learning_rate = value.get<double>();
      } else if (key == "weight_decay") {
        cfg.weight_decay = value.get<double>();
      } else if (key == "max_seq_len") {
        cfg.max_seq_len = value.get<int>();
      } else if (key == "batch_size") {
        cfg.batch_size = value.get<int>();
      } else if (key == "epochs") {
        cfg.epochs = value.get<int>();
      } else if (key == "warmup_fraction") {
        cfg.warmup_fraction = value.get<double>();
      } else if (key == "clip_norm") {
        cfg.clip_norm = value.get<double>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "beta1") {
        cfg.beta1 = value.get<double>();
      } else if (key == "beta2") {
        cfg.beta2 = value.get<double>();
      } else if (key == "adam_eps") {
        cfg.adam_eps = value.get<double>();
      } else {
        throw ConfigError("train config: unknown key " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    bad_field("train config", e);
  }
  return cfg;
}

nlohmann::json autotune_space_to_json(const AutotuneSpace& space) {
  return {{"learning_rates", space.learning_rates},
          {"epochs", space.epochs},
          {"n_max", space.n_max},
          {"buckets", space.buckets},
          {"dims", space.dims},
          {"budget", space.budget},
          {"objective", space.objective}};
}

AutotuneSpace autotune_space_from_json(const nlohmann::json& j) {
  AutotuneSpace space;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rates") {
        space.learning_rates = value.get<std::vector<double>>();
      } else if (key == "epochs") {
        space.epochs = value.get<std::vector<int>>();
      } else if (key == "n_max") {
        space.n_max = value.get<std::vector<int>>();
      } else if (key == "buckets") {
        space.buckets = value.get<std::vector<int>>();
      } else if (key == "dims") {
        space.dims = value.get<std::vector<int>>();
      } else if (key == "budget") {
        space.budget = value.get<int>();
      } else if (key == "objective") {
        space.objective = value.get<std::string>();
      } else {
        throw ConfigError("autotune space: unknown key " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    bad_field("autotune space", e);
  }
  return space;
}

}  // namespace biasdet
