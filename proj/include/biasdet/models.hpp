#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "biasdet/model_config.hpp"
#include "biasdet/params.hpp"
#include "biasdet/rng.hpp"
#include "biasdet/subword.hpp"
#include "biasdet/tape.hpp"
#include "biasdet/tokenize.hpp"
#include "biasdet/vocab.hpp"

namespace biasdet {

// Featurized dataset shared by the training loop: one entry per example,
// aligned ids/labels/examples.
template <typename Ex>
struct Dataset {
  std::vector<Ex> examples;
  std::vector<std::int32_t> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return examples.size(); }
};

namespace detail {

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dropout_mask(
    Rng& rng, Eigen::Index rows, Eigen::Index cols, double rate) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
  const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = rng.uniform01() >= rate ? keep_scale : Scalar(0);
    }
  }
  return m;
}

}  // namespace detail

// Bag-of-hashed-n-grams classifier: bucket embeddings averaged per example,
// then a linear head to 2 logits.
template <typename Scalar>
class NGramLinearModel {
 public:
  using ScalarType = Scalar;
  using Tp = Tape<Scalar>;
  using Var = typename Tp::Var;
  using Mat = typename Tp::Mat;

  struct Example {
    std::vector<std::uint32_t> features;
  };

  struct Batch {
    std::vector<std::int32_t> offsets{0};
    std::vector<std::int32_t> flat;
    std::vector<std::int32_t> labels;
    std::vector<std::string> example_ids;

    Eigen::Index size() const {
      return static_cast<Eigen::Index>(offsets.size()) - 1;
    }
  };

  NGramLinearModel(const NGramLinearConfig& cfg, std::uint64_t seed)
      : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed);
    fill_normal(params_.add("feature_emb", "embedding", cfg.buckets, cfg.dim),
                rng, 0.02);
    fill_normal(params_.add("head_w", "head", cfg.dim, 2), rng, 0.02);
    params_.add("head_b", "head", 1, 2);
  }

  const NGramLinearConfig& config() const { return cfg_; }
  ParamStore<Scalar>& params() { return params_; }
  const ParamStore<Scalar>& params() const { return params_; }
  std::string family() const { return "ngram"; }
  ParamCountBreakdown param_count() const { return ngram_param_count(cfg_); }

  Example featurize(std::string_view text) const {
    auto tokens = normalize_and_tokenize(text);
    auto features = hash_ngram_features(tokens, cfg_.n_max,
                                        static_cast<std::uint32_t>(cfg_.buckets));
    return Example{std::move(features.indices)};
  }

  Batch make_batch(const Dataset<Example>& ds,
                   const std::vector<std::size_t>& idxs) const {
    Batch b;
    for (std::size_t i : idxs) {
      const Example& ex = ds.examples[i];
      for (std::uint32_t f : ex.features) {
        b.flat.push_back(static_cast<std::int32_t>(f));
      }
      b.offsets.push_back(static_cast<std::int32_t>(b.flat.size()));
      b.labels.push_back(ds.labels[i]);
      b.example_ids.push_back(ds.ids[i]);
    }
    return b;
  }

  // Dropout is not part of this family; the rng parameter is accepted for
  // interface uniformity and ignored.
  Var build_loss(Tp& t, const Batch& b, Rng* /*dropout_rng*/,
                 std::vector<Var>* param_vars) const {
    auto bound = forward_logits(t, b);
    if (param_vars != nullptr) *param_vars = bound.first;
    return t.softmax_xent_mean(bound.second, b.labels);
  }

  Mat predict_proba(const Batch& b) const {
    Tp t;
    auto bound = forward_logits(t, b);
    return t.value(t.softmax_rows(bound.second));
  }

 private:
  NGramLinearConfig cfg_;
  ParamStore<Scalar> params_;

  std::pair<std::vector<Var>, Var> forward_logits(Tp& t, const Batch& b) const {
    std::vector<Var> pv;
    for (const auto& e : params_.entries()) pv.push_back(t.leaf(e.value));
    Var pooled = t.bag_mean(pv[0], b.offsets, b.flat);
    Var logits = linear(t, pooled, pv[1], pv[2]);
    return {std::move(pv), logits};
  }
};

// Stacked bidirectional LSTM over word embeddings with a linear head on the
// concatenated final states of the top layer.
template <typename Scalar>
class BiLstmModel {
 public:
  using ScalarType = Scalar;
  using Tp = Tape<Scalar>;
  using Var = typename Tp::Var;
  using Mat = typename Tp::Mat;

  struct Example {
    std::vector<std::int32_t> ids;  // unpadded word ids
  };

  struct Batch {
    Eigen::Index batch = 0;
    Eigen::Index seq = 0;
    std::vector<std::int32_t> ids;   // batch*seq, row-major, pad = 0
    std::vector<Scalar> mask;        // batch*seq, 1 for real tokens
    std::vector<std::int32_t> labels;
    std::vector<std::string> example_ids;

    Eigen::Index size() const { return batch; }
  };

  // vocab_rows includes the pad and unk rows. When `pretrained` is given, its
  // row k fills vocab id k + 2; the unk row is drawn from the init stream.
  BiLstmModel(const BiLstmConfig& cfg, std::uint64_t seed, int vocab_rows,
              const Eigen::MatrixXf* pretrained = nullptr)
      : cfg_(cfg), vocab_rows_(vocab_rows) {
    cfg.validate();
    if (vocab_rows < WordVocab::kSpecialCount) {
      throw ConfigError("bilstm: vocabulary must include the special rows");
    }
    Rng rng(seed);
    const int h = cfg.hidden;
    Mat& emb = params_.add("word_emb", "embedding", vocab_rows,
                           cfg.embedding_dim);
    if (pretrained != nullptr) {
      if (pretrained->rows() != vocab_rows - WordVocab::kSpecialCount ||
          pretrained->cols() != cfg.embedding_dim) {
        throw ConfigError("bilstm: pretrained embedding shape mismatch");
      }
      for (Eigen::Index j = 0; j < emb.cols(); ++j) {
        emb(WordVocab::kUnkId, j) = static_cast<Scalar>(rng.normal() * 0.1);
      }
      emb.bottomRows(vocab_rows - WordVocab::kSpecialCount) =
          pretrained->cast<Scalar>();
    } else {
      // All rows except pad; the pad row stays zero.
      Mat rows(vocab_rows - 1, cfg.embedding_dim);
      fill_normal(rows, rng, 0.02);
      emb.bottomRows(rows.rows()) = rows;
    }
    for (int l = 0; l < cfg.layers; ++l) {
      const int in = (l == 0) ? cfg.embedding_dim : 2 * h;
      for (const char* dir : {"fwd", "bwd"}) {
        std::string base = "layer" + std::to_string(l) + "." + dir;
        fill_normal(params_.add(base + ".wx", "encoder", in, 4 * h), rng, 0.02);
        fill_normal(params_.add(base + ".wh", "encoder", h, 4 * h), rng, 0.02);
        params_.add(base + ".bias", "encoder", 1, 4 * h);
      }
    }
    fill_normal(params_.add("head_w", "head", 2 * h, 2), rng, 0.02);
    params_.add("head_b", "head", 1, 2);
  }

  const BiLstmConfig& config() const { return cfg_; }
  int vocab_rows() const { return vocab_rows_; }
  ParamStore<Scalar>& params() { return params_; }
  const ParamStore<Scalar>& params() const { return params_; }
  std::string family() const { return "bilstm"; }
  ParamCountBreakdown param_count() const {
    return bilstm_param_count(cfg_, vocab_rows_);
  }

  static Example featurize(std::string_view text, const WordVocab& vocab,
                           std::size_t max_len) {
    return Example{vocab.encode_ids(text, max_len)};
  }

  Batch make_batch(const Dataset<Example>& ds,
                   const std::vector<std::size_t>& idxs) const {
    Batch b;
    b.batch = static_cast<Eigen::Index>(idxs.size());
    std::size_t seq = 1;
    for (std::size_t i : idxs) seq = std::max(seq, ds.examples[i].ids.size());
    b.seq = static_cast<Eigen::Index>(seq);
    b.ids.assign(static_cast<std::size_t>(b.batch * b.seq), WordVocab::kPadId);
    b.mask.assign(static_cast<std::size_t>(b.batch * b.seq), Scalar(0));
    for (std::size_t r = 0; r < idxs.size(); ++r) {
      const auto& ids = ds.examples[idxs[r]].ids;
      for (std::size_t t = 0; t < ids.size(); ++t) {
        b.ids[r * seq + t] = ids[t];
        b.mask[r * seq + t] = Scalar(1);
      }
      b.labels.push_back(ds.labels[idxs[r]]);
      b.example_ids.push_back(ds.ids[idxs[r]]);
    }
    return b;
  }

  Var build_loss(Tp& t, const Batch& b, Rng* dropout_rng,
                 std::vector<Var>* param_vars) const {
    auto bound = forward_logits(t, b, dropout_rng);
    if (param_vars != nullptr) *param_vars = bound.first;
    return t.softmax_xent_mean(bound.second, b.labels);
  }

  Mat predict_proba(const Batch& b) const {
    Tp t;
    auto bound = forward_logits(t, b, nullptr);
    return t.value(t.softmax_rows(bound.second));
  }

 private:
  BiLstmConfig cfg_;
  int vocab_rows_;
  ParamStore<Scalar> params_;

  // Parameter layout: word_emb, then per layer fwd/bwd (wx, wh, bias), then
  // head. Offsets below mirror the constructor.
  std::pair<std::vector<Var>, Var> forward_logits(Tp& t, const Batch& b,
                                                  Rng* dropout_rng) const {
    const int h = cfg_.hidden;
    const Eigen::Index B = b.batch, S = b.seq;
    std::vector<Var> pv;
    for (const auto& e : params_.entries()) pv.push_back(t.leaf(e.value));

    // Variational dropout masks, drawn in a fixed order: input mask first,
    // then one recurrent mask per (layer, direction).
    Var input_mask = -1;
    std::vector<Var> rec_masks;
    if (dropout_rng != nullptr) {
      if (cfg_.input_dropout > 0.0) {
        input_mask = t.constant(detail::dropout_mask<Scalar>(
            *dropout_rng, B, cfg_.embedding_dim, cfg_.input_dropout));
      }
      for (int l = 0; l < cfg_.layers; ++l) {
        for (int d = 0; d < 2; ++d) {
          rec_masks.push_back(
              cfg_.recurrent_dropout > 0.0
                  ? t.constant(detail::dropout_mask<Scalar>(
                        *dropout_rng, B, h, cfg_.recurrent_dropout))
                  : -1);
        }
      }
    } else {
      rec_masks.assign(static_cast<std::size_t>(cfg_.layers) * 2, -1);
    }

    std::vector<Var> step_mask(S), step_keep(S);
    for (Eigen::Index s = 0; s < S; ++s) {
      Mat m(B, 1), km(B, 1);
      for (Eigen::Index r = 0; r < B; ++r) {
        m(r, 0) = b.mask[static_cast<std::size_t>(r * S + s)];
        km(r, 0) = Scalar(1) - m(r, 0);
      }
      step_mask[s] = t.constant(std::move(m));
      step_keep[s] = t.constant(std::move(km));
    }
    Var zero_state = t.constant(Mat::Zero(B, h));

    // Layer 0 inputs: embedded tokens with optional input dropout.
    std::vector<Var> inputs(S);
    for (Eigen::Index s = 0; s < S; ++s) {
      std::vector<std::int32_t> col(static_cast<std::size_t>(B));
      for (Eigen::Index r = 0; r < B; ++r) {
        col[static_cast<std::size_t>(r)] =
            b.ids[static_cast<std::size_t>(r * S + s)];
      }
      Var x = t.gather_rows(pv[0], col);
      if (input_mask >= 0) x = t.hadamard(x, input_mask);
      inputs[s] = x;
    }

    auto run_direction = [&](const std::vector<Var>& xs, bool backward,
                             Var wx, Var wh, Var bias, Var rec_mask,
                             std::vector<Var>& out_seq) {
      Var hs = zero_state, cs = zero_state;
      out_seq.assign(static_cast<std::size_t>(S), -1);
      for (Eigen::Index step = 0; step < S; ++step) {
        Eigen::Index s = backward ? S - 1 - step : step;
        Var h_in = rec_mask >= 0 ? t.hadamard(hs, rec_mask) : hs;
        Var gates = t.add_row_vec(
            t.add(t.matmul(xs[static_cast<std::size_t>(s)], wx),
                  t.matmul(h_in, wh)),
            bias);
        Var gi = t.sigmoid(t.slice_cols(gates, 0, h));
        Var gf = t.sigmoid(t.slice_cols(gates, h, h));
        Var gg = t.tanh(t.slice_cols(gates, 2 * h, h));
        Var go = t.sigmoid(t.slice_cols(gates, 3 * h, h));
        Var c_new = t.add(t.hadamard(gf, cs), t.hadamard(gi, gg));
        Var h_new = t.hadamard(go, t.tanh(c_new));
        cs = t.add(t.mul_col_vec(c_new, step_mask[s]),
                   t.mul_col_vec(cs, step_keep[s]));
        hs = t.add(t.mul_col_vec(h_new, step_mask[s]),
                   t.mul_col_vec(hs, step_keep[s]));
        out_seq[static_cast<std::size_t>(s)] = hs;
      }
      return hs;
    };

    std::vector<Var> layer_in = inputs;
    Var final_fwd = -1, final_bwd = -1;
    for (int l = 0; l < cfg_.layers; ++l) {
      const std::size_t base = 1 + static_cast<std::size_t>(l) * 6;
      std::vector<Var> fwd_seq, bwd_seq;
      final_fwd = run_direction(layer_in, false, pv[base], pv[base + 1],
                                pv[base + 2], rec_masks[2 * l], fwd_seq);
      final_bwd = run_direction(layer_in, true, pv[base + 3], pv[base + 4],
                                pv[base + 5], rec_masks[2 * l + 1], bwd_seq);
      if (l + 1 < cfg_.layers) {
        std::vector<Var> next(S);
        for (Eigen::Index s = 0; s < S; ++s) {
          next[s] = t.concat_cols({fwd_seq[static_cast<std::size_t>(s)],
                                   bwd_seq[static_cast<std::size_t>(s)]});
        }
        layer_in = std::move(next);
      }
    }

    Var pooled = t.concat_cols({final_fwd, final_bwd});
    const std::size_t head = 1 + static_cast<std::size_t>(cfg_.layers) * 6;
    Var logits = linear(t, pooled, pv[head], pv[head + 1]);
    return {std::move(pv), logits};
  }
};

// Post-layer-norm transformer encoder with learned positions, optional
// cross-layer parameter sharing and factorized token embedding; the head
// reads the first-position representation.
template <typename Scalar>
class TransformerModel {
 public:
  using ScalarType = Scalar;
  using Tp = Tape<Scalar>;
  using Var = typename Tp::Var;
  using Mat = typename Tp::Mat;

  struct Example {
    std::vector<std::int32_t> ids;  // real (unpadded) ids, starts with [start]
  };

  struct Batch {
    Eigen::Index batch = 0;
    Eigen::Index seq = 0;
    std::vector<std::int32_t> ids;  // batch*seq, row-major, pad = 0
    std::vector<std::int8_t> mask;  // batch*seq
    std::vector<std::int32_t> labels;
    std::vector<std::string> example_ids;

    Eigen::Index size() const { return batch; }
  };

  TransformerModel(const TransformerConfig& cfg, std::uint64_t seed)
      : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed);
    const int h = cfg.hidden;
    fill_normal(params_.add("tok_emb", "embedding", cfg.vocab_size,
                            cfg.embedding_size),
                rng, 0.02);
    if (cfg.factorized_embedding) {
      fill_normal(params_.add("emb_proj", "embedding", cfg.embedding_size, h),
                  rng, 0.02);
    }
    fill_normal(params_.add("pos_emb", "positional", cfg.max_positions, h),
                rng, 0.02);
    params_.add("emb_ln.gain", "positional", 1, h).setOnes();
    params_.add("emb_ln.bias", "positional", 1, h);
    const int blocks = cfg.cross_layer_sharing ? 1 : cfg.layers;
    for (int l = 0; l < blocks; ++l) {
      std::string base =
          cfg.cross_layer_sharing ? "shared" : "layer" + std::to_string(l);
      for (const char* part : {"wq", "wk", "wv", "wo"}) {
        fill_normal(params_.add(base + ".attn." + part, "encoder", h, h), rng,
                    0.02);
      }
      for (const char* part : {"bq", "bk", "bv", "bo"}) {
        params_.add(base + ".attn." + part, "encoder", 1, h);
      }
      params_.add(base + ".ln1.gain", "encoder", 1, h).setOnes();
      params_.add(base + ".ln1.bias", "encoder", 1, h);
      fill_normal(params_.add(base + ".ffn.w1", "encoder", h, cfg.ffn), rng,
                  0.02);
      params_.add(base + ".ffn.b1", "encoder", 1, cfg.ffn);
      fill_normal(params_.add(base + ".ffn.w2", "encoder", cfg.ffn, h), rng,
                  0.02);
      params_.add(base + ".ffn.b2", "encoder", 1, h);
      params_.add(base + ".ln2.gain", "encoder", 1, h).setOnes();
      params_.add(base + ".ln2.bias", "encoder", 1, h);
    }
    fill_normal(params_.add("head_w", "head", h, 2), rng, 0.02);
    params_.add("head_b", "head", 1, 2);
  }

  const TransformerConfig& config() const { return cfg_; }
  ParamStore<Scalar>& params() { return params_; }
  const ParamStore<Scalar>& params() const { return params_; }
  std::string family() const { return "transformer"; }
  ParamCountBreakdown param_count() const {
    return transformer_param_count(cfg_);
  }

  static Example featurize(std::string_view text,
                           const SubwordTokenizer& tokenizer,
                           std::size_t max_len) {
    EncodedSequence enc = tokenizer.encode(text, max_len);
    Example ex;
    for (std::size_t i = 0; i < enc.ids.size(); ++i) {
      if (enc.mask[i] == 0) break;
      ex.ids.push_back(enc.ids[i]);
    }
    return ex;
  }

  Batch make_batch(const Dataset<Example>& ds,
                   const std::vector<std::size_t>& idxs) const {
    Batch b;
    b.batch = static_cast<Eigen::Index>(idxs.size());
    std::size_t seq = 1;
    for (std::size_t i : idxs) seq = std::max(seq, ds.examples[i].ids.size());
    if (seq > static_cast<std::size_t>(cfg_.max_positions)) {
      throw ContractError("transformer: sequence longer than max_positions");
    }
    b.seq = static_cast<Eigen::Index>(seq);
    b.ids.assign(static_cast<std::size_t>(b.batch * b.seq),
                 SubwordTokenizer::kPadId);
    b.mask.assign(static_cast<std::size_t>(b.batch * b.seq), 0);
    for (std::size_t r = 0; r < idxs.size(); ++r) {
      const auto& ids = ds.examples[idxs[r]].ids;
      for (std::size_t s = 0; s < ids.size(); ++s) {
        b.ids[r * seq + s] = ids[s];
        b.mask[r * seq + s] = 1;
      }
      b.labels.push_back(ds.labels[idxs[r]]);
      b.example_ids.push_back(ds.ids[idxs[r]]);
    }
    return b;
  }

  // This family has no dropout knob; rng accepted for uniformity, ignored.
  Var build_loss(Tp& t, const Batch& b, Rng* /*dropout_rng*/,
                 std::vector<Var>* param_vars) const {
    auto bound = forward_logits(t, b);
    if (param_vars != nullptr) *param_vars = bound.first;
    return t.softmax_xent_mean(bound.second, b.labels);
  }

  Mat predict_proba(const Batch& b) const {
    Tp t;
    auto bound = forward_logits(t, b);
    return t.value(t.softmax_rows(bound.second));
  }

 private:
  TransformerConfig cfg_;
  ParamStore<Scalar> params_;

  std::size_t entry_index(const std::string& name) const {
    const auto& es = params_.entries();
    for (std::size_t i = 0; i < es.size(); ++i) {
      if (es[i].name == name) return i;
    }
    throw ContractError("transformer: missing parameter " + name);
  }

  std::pair<std::vector<Var>, Var> forward_logits(Tp& t, const Batch& b) const {
    const int h = cfg_.hidden;
    const int dh = h / cfg_.heads;
    const Eigen::Index B = b.batch, S = b.seq;
    std::vector<Var> pv;
    for (const auto& e : params_.entries()) pv.push_back(t.leaf(e.value));

    Var x = -1;
    {
      std::vector<std::int32_t> flat(b.ids.begin(), b.ids.end());
      Var tok = t.gather_rows(pv[entry_index("tok_emb")], flat);
      if (cfg_.factorized_embedding) {
        tok = t.matmul(tok, pv[entry_index("emb_proj")]);
      }
      std::vector<std::int32_t> pos(static_cast<std::size_t>(B * S));
      for (Eigen::Index r = 0; r < B; ++r) {
        for (Eigen::Index s = 0; s < S; ++s) {
          pos[static_cast<std::size_t>(r * S + s)] =
              static_cast<std::int32_t>(s);
        }
      }
      Var p = t.gather_rows(pv[entry_index("pos_emb")], pos);
      x = layer_norm(t, t.add(tok, p), pv[entry_index("emb_ln.gain")],
                     pv[entry_index("emb_ln.bias")]);
    }

    // Key-side mask bias per example: 0 on real positions, -1e30 on pads.
    std::vector<Var> key_bias(static_cast<std::size_t>(B));
    for (Eigen::Index r = 0; r < B; ++r) {
      Mat bias(1, S);
      for (Eigen::Index s = 0; s < S; ++s) {
        bias(0, s) = b.mask[static_cast<std::size_t>(r * S + s)] != 0
                         ? Scalar(0)
                         : Scalar(-1e30);
      }
      key_bias[static_cast<std::size_t>(r)] = t.constant(std::move(bias));
    }

    const Scalar scale = static_cast<Scalar>(1.0 / std::sqrt(double(dh)));
    for (int l = 0; l < cfg_.layers; ++l) {
      std::string base =
          cfg_.cross_layer_sharing ? "shared" : "layer" + std::to_string(l);
      Var q = linear(t, x, pv[entry_index(base + ".attn.wq")],
                     pv[entry_index(base + ".attn.bq")]);
      Var k = linear(t, x, pv[entry_index(base + ".attn.wk")],
                     pv[entry_index(base + ".attn.bk")]);
      Var v = linear(t, x, pv[entry_index(base + ".attn.wv")],
                     pv[entry_index(base + ".attn.bv")]);
      std::vector<Var> per_example;
      per_example.reserve(static_cast<std::size_t>(B));
      for (Eigen::Index r = 0; r < B; ++r) {
        Var qe = t.slice_rows(q, static_cast<int>(r * S), static_cast<int>(S));
        Var ke = t.slice_rows(k, static_cast<int>(r * S), static_cast<int>(S));
        Var ve = t.slice_rows(v, static_cast<int>(r * S), static_cast<int>(S));
        std::vector<Var> heads;
        heads.reserve(static_cast<std::size_t>(cfg_.heads));
        for (int a = 0; a < cfg_.heads; ++a) {
          Var qh = t.slice_cols(qe, a * dh, dh);
          Var kh = t.slice_cols(ke, a * dh, dh);
          Var vh = t.slice_cols(ve, a * dh, dh);
          Var scores = t.scalar_mul(t.matmul(qh, t.transpose(kh)), scale);
          scores = t.add_row_vec(scores, key_bias[static_cast<std::size_t>(r)]);
          Var attn = t.softmax_rows(scores);
          heads.push_back(t.matmul(attn, vh));
        }
        per_example.push_back(t.concat_cols(heads));
      }
      Var attn_out = linear(t, t.concat_rows(per_example),
                            pv[entry_index(base + ".attn.wo")],
                            pv[entry_index(base + ".attn.bo")]);
      x = layer_norm(t, t.add(x, attn_out),
                     pv[entry_index(base + ".ln1.gain")],
                     pv[entry_index(base + ".ln1.bias")]);
      Var ff = linear(t,
                      t.gelu(linear(t, x, pv[entry_index(base + ".ffn.w1")],
                                    pv[entry_index(base + ".ffn.b1")])),
                      pv[entry_index(base + ".ffn.w2")],
                      pv[entry_index(base + ".ffn.b2")]);
      x = layer_norm(t, t.add(x, ff), pv[entry_index(base + ".ln2.gain")],
                     pv[entry_index(base + ".ln2.bias")]);
    }

    std::vector<std::int32_t> first(static_cast<std::size_t>(B));
    for (Eigen::Index r = 0; r < B; ++r) {
      first[static_cast<std::size_t>(r)] = static_cast<std::int32_t>(r * S);
    }
    Var cls = t.gather_rows(x, first);
    Var logits = linear(t, cls, pv[entry_index("head_w")],
                        pv[entry_index("head_b")]);
    return {std::move(pv), logits};
  }
};

}  // namespace biasdet
