#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "biasdet/errors.hpp"
#include "biasdet/models.hpp"

using namespace biasdet;

namespace {

const char* kWords[] = {"the",  "a",     "very",  "cat",    "dog",  "report",
                        "was",  "is",    "good",  "bad",    "truly", "plain",
                        "ran",  "fast",  "slow",  "quietly", "loud", "city",
                        "old",  "new"};

std::string random_text(std::mt19937& gen) {
  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kWords) - 1);
  std::string out;
  int n = len(gen);
  for (int i = 0; i < n; ++i) {
    if (!out.empty()) out += ' ';
    out += kWords[pick(gen)];
  }
  if (gen() % 3 == 0) out += " .";
  return out;
}

std::vector<std::string> training_texts() {
  std::vector<std::string> texts;
  std::mt19937 gen(41);
  for (int i = 0; i < 60; ++i) texts.push_back(random_text(gen));
  return texts;
}

template <typename Model>
void check_probability_rows(const typename Model::Mat& p) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      double v = static_cast<double>(p(i, j));
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

std::vector<std::size_t> iota_idx(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

TEST_CASE("prediction rows are probability distributions for every family") {
  std::mt19937 gen(77);
  auto corpus = training_texts();

  SUBCASE("ngram") {
    NGramLinearConfig cfg;
    cfg.buckets = 512;
    cfg.dim = 8;
    NGramLinearModel<float> model(cfg, 5);
    Dataset<NGramLinearModel<float>::Example> ds;
    for (int i = 0; i < 400; ++i) {
      ds.examples.push_back(model.featurize(random_text(gen)));
      ds.labels.push_back(i % 2);
      ds.ids.push_back(std::to_string(i));
    }
    for (std::size_t at = 0; at < ds.size(); at += 20) {
      std::vector<std::size_t> idx;
      for (std::size_t i = at; i < at + 20; ++i) idx.push_back(i);
      check_probability_rows<NGramLinearModel<float>>(
          model.predict_proba(model.make_batch(ds, idx)));
    }
  }

  SUBCASE("bilstm") {
    BiLstmConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 8;
    cfg.embedding_dim = 8;
    WordVocab vocab = WordVocab::build(corpus);
    BiLstmModel<float> model(cfg, 5, vocab.rows());
    Dataset<BiLstmModel<float>::Example> ds;
    for (int i = 0; i < 300; ++i) {
      ds.examples.push_back(
          BiLstmModel<float>::featurize(random_text(gen), vocab, 16));
      ds.labels.push_back(i % 2);
      ds.ids.push_back(std::to_string(i));
    }
    for (std::size_t at = 0; at < ds.size(); at += 20) {
      std::vector<std::size_t> idx;
      for (std::size_t i = at; i < at + 20; ++i) idx.push_back(i);
      check_probability_rows<BiLstmModel<float>>(
          model.predict_proba(model.make_batch(ds, idx)));
    }
  }

  SUBCASE("transformer") {
    SubwordTokenizer tok = SubwordTokenizer::train(corpus, 80);
    TransformerConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.ffn = 32;
    cfg.embedding_size = 16;
    cfg.vocab_size = tok.vocab_size();
    cfg.max_positions = 24;
    TransformerModel<float> model(cfg, 5);
    Dataset<TransformerModel<float>::Example> ds;
    for (int i = 0; i < 300; ++i) {
      ds.examples.push_back(
          TransformerModel<float>::featurize(random_text(gen), tok, 24));
      ds.labels.push_back(i % 2);
      ds.ids.push_back(std::to_string(i));
    }
    for (std::size_t at = 0; at < ds.size(); at += 20) {
      std::vector<std::size_t> idx;
      for (std::size_t i = at; i < at + 20; ++i) idx.push_back(i);
      check_probability_rows<TransformerModel<float>>(
          model.predict_proba(model.make_batch(ds, idx)));
    }
  }
}

TEST_CASE("inference is pure and deterministic") {
  auto corpus = training_texts();

  SUBCASE("ngram repeated calls match bitwise") {
    NGramLinearConfig cfg;
    cfg.buckets = 256;
    cfg.dim = 8;
    NGramLinearModel<float> model(cfg, 9);
    Dataset<NGramLinearModel<float>::Example> ds;
    for (const auto& text : corpus) {
      ds.examples.push_back(model.featurize(text));
      ds.labels.push_back(0);
      ds.ids.push_back(text);
    }
    auto batch = model.make_batch(ds, iota_idx(10));
    std::uint64_t before = model.params().checksum();
    auto p1 = model.predict_proba(batch);
    auto p2 = model.predict_proba(batch);
    CHECK(p1 == p2);
    CHECK(model.params().checksum() == before);
  }

  SUBCASE("duplicated example yields identical rows in all families") {
    WordVocab vocab = WordVocab::build(corpus);
    BiLstmConfig bcfg;
    bcfg.layers = 1;
    bcfg.hidden = 8;
    bcfg.embedding_dim = 8;
    BiLstmModel<float> bilstm(bcfg, 3, vocab.rows());
    Dataset<BiLstmModel<float>::Example> bds;
    for (int i = 0; i < 4; ++i) {
      bds.examples.push_back(
          BiLstmModel<float>::featurize(corpus[static_cast<std::size_t>(i)],
                                        vocab, 16));
      bds.labels.push_back(0);
      bds.ids.push_back(std::to_string(i));
    }
    auto bp = bilstm.predict_proba(bilstm.make_batch(bds, {1, 2, 1}));
    CHECK(bp.row(0) == bp.row(2));

    SubwordTokenizer tok = SubwordTokenizer::train(corpus, 80);
    TransformerConfig tcfg;
    tcfg.layers = 1;
    tcfg.hidden = 16;
    tcfg.heads = 2;
    tcfg.ffn = 32;
    tcfg.embedding_size = 16;
    tcfg.vocab_size = tok.vocab_size();
    tcfg.max_positions = 24;
    TransformerModel<float> tx(tcfg, 3);
    Dataset<TransformerModel<float>::Example> tds;
    for (int i = 0; i < 4; ++i) {
      tds.examples.push_back(TransformerModel<float>::featurize(
          corpus[static_cast<std::size_t>(i)], tok, 24));
      tds.labels.push_back(0);
      tds.ids.push_back(std::to_string(i));
    }
    auto tp = tx.predict_proba(tx.make_batch(tds, {0, 3, 0}));
    CHECK(tp.row(0) == tp.row(2));

    NGramLinearConfig ncfg;
    ncfg.buckets = 256;
    ncfg.dim = 8;
    NGramLinearModel<float> ngram(ncfg, 3);
    Dataset<NGramLinearModel<float>::Example> nds;
    for (int i = 0; i < 4; ++i) {
      nds.examples.push_back(ngram.featurize(corpus[static_cast<std::size_t>(i)]));
      nds.labels.push_back(0);
      nds.ids.push_back(std::to_string(i));
    }
    auto np = ngram.predict_proba(ngram.make_batch(nds, {2, 0, 2}));
    CHECK(np.row(0) == np.row(2));
  }
}

TEST_CASE("extra padding positions never change predictions") {
  auto corpus = training_texts();

  SUBCASE("bilstm") {
    WordVocab vocab = WordVocab::build(corpus);
    BiLstmConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 8;
    cfg.embedding_dim = 8;
    BiLstmModel<float> model(cfg, 21, vocab.rows());
    auto ex = BiLstmModel<float>::featurize("the cat ran fast .", vocab, 16);
    auto n = static_cast<Eigen::Index>(ex.ids.size());
    BiLstmModel<float>::Batch tight;
    tight.batch = 1;
    tight.seq = n;
    tight.ids = ex.ids;
    tight.mask.assign(static_cast<std::size_t>(n), 1.0f);
    tight.labels = {0};
    tight.example_ids = {"x"};
    BiLstmModel<float>::Batch padded = tight;
    padded.seq = n + 7;
    padded.ids.resize(static_cast<std::size_t>(padded.seq), WordVocab::kPadId);
    padded.mask.resize(static_cast<std::size_t>(padded.seq), 0.0f);
    auto pt = model.predict_proba(tight);
    auto pp = model.predict_proba(padded);
    CHECK(std::abs(pt(0, 0) - pp(0, 0)) <= 1e-6);
    CHECK(std::abs(pt(0, 1) - pp(0, 1)) <= 1e-6);
  }

  SUBCASE("transformer") {
    SubwordTokenizer tok = SubwordTokenizer::train(corpus, 80);
    TransformerConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.ffn = 32;
    cfg.embedding_size = 16;
    cfg.vocab_size = tok.vocab_size();
    cfg.max_positions = 32;
    TransformerModel<float> model(cfg, 21);
    auto ex = TransformerModel<float>::featurize("the dog was very loud", tok, 24);
    auto n = static_cast<Eigen::Index>(ex.ids.size());
    TransformerModel<float>::Batch tight;
    tight.batch = 1;
    tight.seq = n;
    tight.ids = ex.ids;
    tight.mask.assign(static_cast<std::size_t>(n), 1);
    tight.labels = {0};
    tight.example_ids = {"x"};
    TransformerModel<float>::Batch padded = tight;
    padded.seq = n + 5;
    padded.ids.resize(static_cast<std::size_t>(padded.seq),
                      SubwordTokenizer::kPadId);
    padded.mask.resize(static_cast<std::size_t>(padded.seq), 0);
    auto pt = model.predict_proba(tight);
    auto pp = model.predict_proba(padded);
    CHECK(std::abs(pt(0, 0) - pp(0, 0)) <= 1e-6);
    CHECK(std::abs(pt(0, 1) - pp(0, 1)) <= 1e-6);
  }
}

TEST_CASE("same config and seed build identical parameters") {
  NGramLinearConfig ncfg;
  ncfg.buckets = 1024;
  ncfg.dim = 8;
  CHECK(NGramLinearModel<float>(ncfg, 42).params().checksum() ==
        NGramLinearModel<float>(ncfg, 42).params().checksum());
  CHECK(NGramLinearModel<float>(ncfg, 42).params().checksum() !=
        NGramLinearModel<float>(ncfg, 43).params().checksum());

  BiLstmConfig bcfg;
  bcfg.layers = 1;
  bcfg.hidden = 4;
  bcfg.embedding_dim = 4;
  CHECK(BiLstmModel<float>(bcfg, 7, 10).params().checksum() ==
        BiLstmModel<float>(bcfg, 7, 10).params().checksum());

  TransformerConfig tcfg = transformer_preset("tiny");
  tcfg.vocab_size = 50;
  CHECK(TransformerModel<float>(tcfg, 7).params().checksum() ==
        TransformerModel<float>(tcfg, 7).params().checksum());
  CHECK(TransformerModel<float>(tcfg, 7).params().checksum() !=
        TransformerModel<float>(tcfg, 8).params().checksum());
}

TEST_CASE("parameter counts match independent formulas and the live store") {
  SUBCASE("ngram") {
    NGramLinearConfig cfg;
    cfg.buckets = 1024;
    cfg.dim = 8;
    auto got = ngram_param_count(cfg);
    CHECK(got.embedding == 1024LL * 8);
    CHECK(got.head == 8LL * 2 + 2);
    CHECK(got.total() == 1024LL * 8 + 8 * 2 + 2);
    NGramLinearModel<float> model(cfg, 1);
    CHECK(static_cast<long long>(model.params().total_elements()) ==
          got.total());
  }

  SUBCASE("bilstm second formula") {
    BiLstmConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 8;
    cfg.embedding_dim = 12;
    int vocab_rows = 37;
    long long emb = 37LL * 12;
    long long enc = 0;
    for (int l = 0; l < cfg.layers; ++l) {
      long long in = (l == 0) ? cfg.embedding_dim : 2 * cfg.hidden;
      long long per_dir = in * 4 * cfg.hidden +
                          cfg.hidden * 4LL * cfg.hidden + 4LL * cfg.hidden;
      enc += 2 * per_dir;
    }
    long long head = 2LL * cfg.hidden * 2 + 2;
    auto got = bilstm_param_count(cfg, vocab_rows);
    CHECK(got.embedding == emb);
    CHECK(got.encoder == enc);
    CHECK(got.head == head);
    BiLstmModel<float> model(cfg, 1, vocab_rows);
    CHECK(static_cast<long long>(model.params().total_elements()) ==
          got.total());
  }

  SUBCASE("factorized embedding arithmetic") {
    TransformerConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 32;
    cfg.heads = 2;
    cfg.ffn = 64;
    cfg.vocab_size = 100;
    cfg.embedding_size = 16;
    cfg.factorized_embedding = true;
    cfg.max_positions = 16;
    CHECK(transformer_param_count(cfg).embedding == 100LL * 16 + 16 * 32);
    CHECK(transformer_param_count(cfg).embedding == 2112);

    TransformerConfig plain = cfg;
    plain.factorized_embedding = false;
    plain.embedding_size = 32;
    CHECK(transformer_param_count(plain).embedding == 3200);
  }

  SUBCASE("tiny preset total matches the closed form") {
    TransformerConfig cfg = transformer_preset("tiny");
    cfg.vocab_size = 200;
    long long h = cfg.hidden, f = cfg.ffn;
    long long emb = 200LL * cfg.embedding_size;
    long long pos = static_cast<long long>(cfg.max_positions) * h + 2 * h;
    long long block = 4 * (h * h + h) + 2 * h + (h * f + f) + (f * h + h) + 2 * h;
    long long enc = cfg.layers * block;
    long long head = h * 2 + 2;
    auto got = transformer_param_count(cfg);
    CHECK(got.embedding == emb);
    CHECK(got.positional == pos);
    CHECK(got.encoder == enc);
    CHECK(got.head == head);
    TransformerModel<float> model(cfg, 1);
    CHECK(static_cast<long long>(model.params().total_elements()) ==
          got.total());
  }
}

TEST_CASE("cross-layer sharing keeps encoder parameters independent of depth") {
  long long shared_count = -1;
  for (int layers : {1, 2, 6}) {
    TransformerConfig cfg = transformer_preset("albert-like");
    cfg.layers = layers;
    cfg.vocab_size = 120;
    auto got = transformer_param_count(cfg);
    if (shared_count < 0) shared_count = got.encoder;
    CHECK(got.encoder == shared_count);
    TransformerModel<float> model(cfg, 1);
    CHECK(static_cast<long long>(model.params().total_elements()) ==
          got.total());
  }

  TransformerConfig unshared = transformer_preset("small");
  unshared.vocab_size = 120;
  unshared.layers = 2;
  auto two = transformer_param_count(unshared).encoder;
  unshared.layers = 4;
  CHECK(transformer_param_count(unshared).encoder == 2 * two);
}

TEST_CASE("factorization saves parameters whenever the bound holds") {
  for (auto [v, e, h] : {std::tuple<int, int, int>{100, 16, 32},
                         std::tuple<int, int, int>{5000, 64, 256},
                         std::tuple<int, int, int>{1000, 8, 128}}) {
    long long factorized = static_cast<long long>(v) * e +
                           static_cast<long long>(e) * h;
    long long dense = static_cast<long long>(v) * h;
    double bound = double(v) * h / (double(v) + h);
    if (e < bound) CHECK(factorized < dense);
  }
}

TEST_CASE("featurize matches the text pipeline it wraps") {
  NGramLinearConfig cfg;
  cfg.buckets = 2048;
  cfg.dim = 8;
  cfg.n_max = 2;
  NGramLinearModel<float> model(cfg, 1);
  auto ex = model.featurize("The cat SAT.");
  auto direct = hash_ngram_features(normalize_and_tokenize("The cat SAT."), 2,
                                    2048);
  CHECK(ex.features == direct.indices);

  auto corpus = training_texts();
  WordVocab vocab = WordVocab::build(corpus);
  auto bex = BiLstmModel<float>::featurize(
      "the cat zzzunknownzzz " + std::string(40, 'x') + " dog", vocab, 3);
  CHECK(bex.ids.size() == 3);
  CHECK(bex.ids[0] == vocab.id_of("the"));
  CHECK(bex.ids[1] == vocab.id_of("cat"));
  CHECK(bex.ids[2] == WordVocab::kUnkId);

  SubwordTokenizer tok = SubwordTokenizer::train(corpus, 80);
  auto tex = TransformerModel<float>::featurize("the cat", tok, 24);
  REQUIRE(tex.ids.size() >= 2);
  CHECK(tex.ids.front() == SubwordTokenizer::kStartId);
  CHECK(tex.ids.back() == SubwordTokenizer::kSepId);
  for (std::int32_t id : tex.ids) CHECK(id != SubwordTokenizer::kPadId);
}

TEST_CASE("batches pad to the longest member and reject overlong input") {
  auto corpus = training_texts();
  WordVocab vocab = WordVocab::build(corpus);
  BiLstmConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 4;
  cfg.embedding_dim = 4;
  BiLstmModel<float> model(cfg, 1, vocab.rows());
  Dataset<BiLstmModel<float>::Example> ds;
  ds.examples.push_back(BiLstmModel<float>::featurize("the cat", vocab, 16));
  ds.examples.push_back(
      BiLstmModel<float>::featurize("a very old dog ran fast", vocab, 16));
  ds.labels = {0, 1};
  ds.ids = {"a", "b"};
  auto batch = model.make_batch(ds, {0, 1});
  CHECK(batch.seq == 6);
  CHECK(batch.ids[2] == WordVocab::kPadId);
  CHECK(batch.mask[1] == 1.0f);
  CHECK(batch.mask[2] == 0.0f);

  SubwordTokenizer tok = SubwordTokenizer::train(corpus, 80);
  TransformerConfig tcfg;
  tcfg.layers = 1;
  tcfg.hidden = 16;
  tcfg.heads = 2;
  tcfg.ffn = 32;
  tcfg.embedding_size = 16;
  tcfg.vocab_size = tok.vocab_size();
  tcfg.max_positions = 4;
  TransformerModel<float> tx(tcfg, 1);
  Dataset<TransformerModel<float>::Example> tds;
  tds.examples.push_back(TransformerModel<float>::featurize(
      "the quiet old city report was truly good", tok, 40));
  tds.labels = {0};
  tds.ids = {"a"};
  CHECK_THROWS_AS(tx.make_batch(tds, {0}), ContractError);
}

TEST_CASE("invalid configurations are rejected at construction") {
  NGramLinearConfig n;
  n.buckets = 0;
  CHECK_THROWS_AS(NGramLinearModel<float>(n, 1), ConfigError);

  BiLstmConfig b;
  b.layers = 0;
  CHECK_THROWS_AS(BiLstmModel<float>(b, 1, 10), ConfigError);
  BiLstmConfig b2;
  CHECK_THROWS_AS(BiLstmModel<float>(b2, 1, 1), ConfigError);

  TransformerConfig t;
  t.vocab_size = 50;
  t.hidden = 30;
  t.heads = 4;
  CHECK_THROWS_AS(TransformerModel<float>(t, 1), ConfigError);

  TransformerConfig t2 = transformer_preset("tiny");
  t2.vocab_size = 50;
  t2.factorized_embedding = true;
  t2.embedding_size = t2.hidden * 2;
  CHECK_THROWS_AS(TransformerModel<float>(t2, 1), ConfigError);

  CHECK_THROWS_AS(transformer_preset("huge"), ConfigError);
}

TEST_CASE("presets carry the documented shapes") {
  auto tiny = transformer_preset("tiny");
  CHECK(tiny.layers == 2);
  CHECK(tiny.hidden == 64);
  CHECK(tiny.heads == 2);
  CHECK(tiny.ffn == 256);
  auto small = transformer_preset("small");
  CHECK(small.layers == 4);
  CHECK(small.hidden == 128);
  auto large = transformer_preset("large-like");
  CHECK(large.layers == 6);
  CHECK(large.hidden == 256);
  CHECK(large.heads == 8);
  CHECK(large.ffn == 1024);
  auto distilled = transformer_preset("distilled-like");
  CHECK(distilled.layers == large.layers / 2);
  auto albert = transformer_preset("albert-like");
  CHECK(albert.cross_layer_sharing);
  CHECK(albert.factorized_embedding);
  CHECK(albert.layers == small.layers);
  CHECK(albert.embedding_size < albert.hidden);
}
