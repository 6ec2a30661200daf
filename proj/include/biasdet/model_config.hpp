#pragma once

#include <cstdint>
#include <string>

namespace biasdet {

struct NGramLinearConfig {
  int buckets = 1 << 20;
  int dim = 16;
  int n_max = 2;

  void validate() const;
};

struct BiLstmConfig {
  int layers = 2;
  int hidden = 64;
  double input_dropout = 0.05;
  double recurrent_dropout = 0.2;
  int embedding_dim = 100;
  std::string embedding_source = "random";  // "random" or "file"

  void validate() const;
};

struct TransformerConfig {
  int layers = 4;
  int hidden = 128;
  int heads = 4;
  int ffn = 512;
  int vocab_size = 0;  // set when the tokenizer is known
  int embedding_size = 128;
  int max_positions = 50;
  bool cross_layer_sharing = false;
  bool factorized_embedding = false;
  std::string preset = "small";

  void validate() const;
};

// Presets: tiny, small, distilled-like, large-like, albert-like.
// vocab_size is left 0; callers fill it in from the tokenizer.
TransformerConfig transformer_preset(const std::string& name);

struct ParamCountBreakdown {
  long long embedding = 0;   // token embedding (+ factorization projection)
  long long positional = 0;  // position table + embedding layer norm
  long long encoder = 0;
  long long head = 0;

  long long total() const { return embedding + positional + encoder + head; }
};

ParamCountBreakdown ngram_param_count(const NGramLinearConfig& cfg);
ParamCountBreakdown bilstm_param_count(const BiLstmConfig& cfg, int vocab_rows);
ParamCountBreakdown transformer_param_count(const TransformerConfig& cfg);

}  // namespace biasdet
