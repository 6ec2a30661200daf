#include "biasdet/model_config.hpp"

#include "biasdet/errors.hpp"

namespace biasdet {

void NGramLinearConfig::validate() const {
  if (buckets < 2) throw ConfigError("ngram config: buckets must be >= 2");
  if (dim < 1) throw ConfigError("ngram config: dim must be positive");
  if (n_max < 1) throw ConfigError("ngram config: n_max must be positive");
}

void BiLstmConfig::validate() const {
  if (layers < 1) throw ConfigError("bilstm config: layers must be >= 1");
  if (hidden < 1) throw ConfigError("bilstm config: hidden must be positive");
  if (input_dropout < 0.0 || input_dropout >= 1.0) {
    throw ConfigError("bilstm config: input_dropout must be in [0,1)");
  }
  if (recurrent_dropout < 0.0 || recurrent_dropout >= 1.0) {
    throw ConfigError("bilstm config: recurrent_dropout must be in [0,1)");
  }
  if (embedding_dim < 1) {
    throw ConfigError("bilstm config: embedding_dim must be positive");
  }
  if (embedding_source != "random" && embedding_source != "file") {
    throw ConfigError("bilstm config: embedding_source must be random or file");
  }
}

void TransformerConfig::validate() const {
  if (layers < 1) throw ConfigError("transformer config: layers must be >= 1");
  if (hidden < 1) throw ConfigError("transformer config: hidden must be positive");
  if (heads < 1) throw ConfigError("transformer config: heads must be positive");
  if (hidden % heads != 0) {
    throw ConfigError("transformer config: hidden must be divisible by heads");
  }
  if (ffn < 1) throw ConfigError("transformer config: ffn must be positive");
  if (vocab_size < 1) {
    throw ConfigError("transformer config: vocab_size must be positive");
  }
  if (embedding_size < 1) {
    throw ConfigError("transformer config: embedding_size must be positive");
  }
  if (factorized_embedding) {
    if (embedding_size > hidden) {
      throw ConfigError(
          "transformer config: embedding_size must not exceed hidden when "
          "factorized");
    }
  } else if (embedding_size != hidden) {
    throw ConfigError(
        "transformer config: embedding_size must equal hidden unless "
        "factorized");
  }
  if (max_positions < 1) {
    throw ConfigError("transformer config: max_positions must be positive");
  }
}

TransformerConfig transformer_preset(const std::string& name) {
  TransformerConfig cfg;
  cfg.preset = name;
  if (name == "tiny") {
    cfg.layers = 2;
    cfg.hidden = 64;
    cfg.heads = 2;
    cfg.ffn = 256;
  } else if (name == "small") {
    cfg.layers = 4;
    cfg.hidden = 128;
    cfg.heads = 4;
    cfg.ffn = 512;
  } else if (name == "distilled-like") {
    cfg.layers = 3;
    cfg.hidden = 256;
    cfg.heads = 8;
    cfg.ffn = 1024;
  } else if (name == "large-like") {
    cfg.layers = 6;
    cfg.hidden = 256;
    cfg.heads = 8;
    cfg.ffn = 1024;
  } else if (name == "albert-like") {
    cfg.layers = 4;
    cfg.hidden = 128;
    cfg.heads = 4;
    cfg.ffn = 512;
    cfg.cross_layer_sharing = true;
    cfg.factorized_embedding = true;
    cfg.embedding_size = 64;
  } else {
    throw ConfigError("unknown transformer preset: " + name);
  }
  if (!cfg.factorized_embedding) cfg.embedding_size = cfg.hidden;
  return cfg;
}

ParamCountBreakdown ngram_param_count(const NGramLinearConfig& cfg) {
  ParamCountBreakdown b;
  long long buckets = cfg.buckets, dim = cfg.dim;
  b.embedding = buckets * dim;
  b.head = dim * 2 + 2;
  return b;
}

ParamCountBreakdown bilstm_param_count(const BiLstmConfig& cfg, int vocab_rows) {
  ParamCountBreakdown b;
  long long d = cfg.embedding_dim, h = cfg.hidden;
  b.embedding = static_cast<long long>(vocab_rows) * d;
  for (int l = 0; l < cfg.layers; ++l) {
    long long in = (l == 0) ? d : 2 * h;
    b.encoder += 2 * (in * 4 * h + h * 4 * h + 4 * h);
  }
  b.head = 2 * h * 2 + 2;
  return b;
}

ParamCountBreakdown transformer_param_count(const TransformerConfig& cfg) {
  ParamCountBreakdown b;
  long long v = cfg.vocab_size, e = cfg.embedding_size, h = cfg.hidden,
            f = cfg.ffn;
  if (cfg.factorized_embedding) {
    b.embedding = v * e + e * h;
  } else {
    b.embedding = v * h;
  }
  b.positional = static_cast<long long>(cfg.max_positions) * h + 2 * h;
  long long block = 4 * (h * h + h)   // attention q,k,v,o
                    + 2 * h           // attention layer norm
                    + h * f + f       // ffn expand
                    + f * h + h       // ffn contract
                    + 2 * h;          // ffn layer norm
  b.encoder = cfg.cross_layer_sharing ? block : block * cfg.layers;
  b.head = h * 2 + 2;
  return b;
}

}  // namespace biasdet
