#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "biasdet/models.hpp"
#include "biasdet/subword.hpp"
#include "biasdet/vocab.hpp"

namespace biasdet {

// A trained model plus its featurizer, behind one text-in, probabilities-out
// interface. Persisted as a bundle directory: manifest.json (family, config,
// seed, format version, per-file checksums), params.index.json (tensor
// names/shapes/offsets) and params.bin (row-major little-endian float32),
// plus the family's featurizer state (vocab.json or tokenizer.json).
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string family() const = 0;
  virtual long long param_count() const = 0;
  virtual std::vector<std::array<double, 2>> predict_texts(
      const std::vector<std::string>& texts, int batch_size) const = 0;
  virtual void save(const std::filesystem::path& dir) const = 0;

  // Reads a bundle directory. Manifest version mismatch raises
  // IncompatibilityError; checksum, size, or tensor-layout mismatch raises
  // CorruptionError.
  static std::unique_ptr<Classifier> load(const std::filesystem::path& dir);
};

class NGramClassifier : public Classifier {
 public:
  NGramClassifier(NGramLinearModel<float> model, std::uint64_t seed)
      : model_(std::move(model)), seed_(seed) {}

  std::string family() const override { return model_.family(); }
  long long param_count() const override {
    return model_.param_count().total();
  }
  std::vector<std::array<double, 2>> predict_texts(
      const std::vector<std::string>& texts, int batch_size) const override;
  void save(const std::filesystem::path& dir) const override;

  const NGramLinearModel<float>& model() const { return model_; }

 private:
  NGramLinearModel<float> model_;
  std::uint64_t seed_;
};

class BiLstmClassifier : public Classifier {
 public:
  BiLstmClassifier(BiLstmModel<float> model, WordVocab vocab, int max_seq_len,
                   std::uint64_t seed)
      : model_(std::move(model)), vocab_(std::move(vocab)),
        max_seq_len_(max_seq_len), seed_(seed) {}

  std::string family() const override { return model_.family(); }
  long long param_count() const override {
    return model_.param_count().total();
  }
  std::vector<std::array<double, 2>> predict_texts(
      const std::vector<std::string>& texts, int batch_size) const override;
  void save(const std::filesystem::path& dir) const override;

  const BiLstmModel<float>& model() const { return model_; }
  const WordVocab& vocab() const { return vocab_; }

 private:
  BiLstmModel<float> model_;
  WordVocab vocab_;
  int max_seq_len_;
  std::uint64_t seed_;
};

class TransformerClassifier : public Classifier {
 public:
  TransformerClassifier(TransformerModel<float> model,
                        SubwordTokenizer tokenizer, int max_seq_len,
                        std::uint64_t seed)
      : model_(std::move(model)), tokenizer_(std::move(tokenizer)),
        max_seq_len_(max_seq_len), seed_(seed) {}

  std::string family() const override { return model_.family(); }
  long long param_count() const override {
    return model_.param_count().total();
  }
  std::vector<std::array<double, 2>> predict_texts(
      const std::vector<std::string>& texts, int batch_size) const override;
  void save(const std::filesystem::path& dir) const override;

  const TransformerModel<float>& model() const { return model_; }
  const SubwordTokenizer& tokenizer() const { return tokenizer_; }

 private:
  TransformerModel<float> model_;
  SubwordTokenizer tokenizer_;
  int max_seq_len_;
  std::uint64_t seed_;
};

}  // namespace biasdet
