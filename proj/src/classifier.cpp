#include "biasdet/classifier.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "biasdet/errors.hpp"
#include "biasdet/hash.hpp"
#include "biasdet/training.hpp"
#include "config_json.hpp"
#include "json.hpp"

namespace biasdet {

namespace {

constexpr int kBundleFormatVersion = 1;

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

template <typename Scalar>
nlohmann::json tensor_index(const ParamStore<Scalar>& params) {
  nlohmann::json tensors = nlohmann::json::array();
  long long offset = 0;
  for (const auto& e : params.entries()) {
    tensors.push_back({{"name", e.name},
                       {"group", e.group},
                       {"rows", e.value.rows()},
                       {"cols", e.value.cols()},
                       {"offset", offset}});
    offset += static_cast<long long>(e.value.size()) * 4;
  }
  return nlohmann::json{{"format_version", kBundleFormatVersion},
                        {"tensors", std::move(tensors)}};
}

// Writes a bundle: the shared pieces plus any family extras already placed
// in `extra_files`, then a manifest checksumming every file it names.
template <typename Scalar>
void write_bundle(const std::filesystem::path& dir, const std::string& family,
                  std::uint64_t seed, int max_seq_len,
                  const nlohmann::json& config,
                  const ParamStore<Scalar>& params,
                  const std::vector<std::pair<std::string, std::string>>&
                      extra_files) {
  std::filesystem::create_directories(dir);

  std::vector<std::pair<std::string, std::string>> files;
  auto blob = params.to_f32_bytes();
  files.emplace_back("params.bin",
                     std::string(blob.begin(), blob.end()));
  files.emplace_back("params.index.json", tensor_index(params).dump(2) + "\n");
  for (const auto& f : extra_files) files.push_back(f);

  nlohmann::json checksums;
  for (const auto& [name, data] : files) {
    write_file(dir / name, data);
    checksums[name] = hex64(fnv1a64_bytes(
        reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
  }

  nlohmann::json manifest{{"format_version", kBundleFormatVersion},
                          {"family", family},
                          {"seed", seed},
                          {"max_seq_len", max_seq_len},
                          {"config", config},
                          {"checksums", std::move(checksums)}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

struct BundleContents {
  nlohmann::json manifest;
  std::string family;
  std::uint64_t seed = 0;
  int max_seq_len = 0;
  nlohmann::json config;
  std::filesystem::path dir;

  std::string verified_file(const std::string& name) const {
    const auto& checksums = manifest.at("checksums");
    if (!checksums.contains(name)) {
      throw CorruptionError("bundle: manifest lists no checksum for " + name);
    }
    std::string data = read_file(dir / name);
    std::string expect = checksums.at(name).get<std::string>();
    std::string got = hex64(fnv1a64_bytes(
        reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
    if (got != expect) {
      throw CorruptionError("bundle: checksum mismatch for " + name +
                            " (expected " + expect + ", got " + got + ")");
    }
    return data;
  }
};

BundleContents open_bundle(const std::filesystem::path& dir) {
  BundleContents b;
  b.dir = dir;
  std::string text = read_file(dir / "manifest.json");
  try {
    b.manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("bundle manifest: bad JSON: " + std::string(e.what()));
  }
  try {
    for (const auto& [key, value] : b.manifest.items()) {
      if (key != "format_version" && key != "family" && key != "seed" &&
          key != "max_seq_len" && key != "config" && key != "checksums") {
        throw FormatError("bundle manifest: unknown key " + key);
      }
    }
    int version = b.manifest.at("format_version").get<int>();
    if (version != kBundleFormatVersion) {
      throw IncompatibilityError(
          "bundle manifest: format version " + std::to_string(version) +
          " unsupported (expected " + std::to_string(kBundleFormatVersion) +
          ")");
    }
    b.family = b.manifest.at("family").get<std::string>();
    b.seed = b.manifest.at("seed").get<std::uint64_t>();
    b.max_seq_len = b.manifest.at("max_seq_len").get<int>();
    b.config = b.manifest.at("config");
    (void)b.manifest.at("checksums");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bundle manifest: " + std::string(e.what()));
  }
  return b;
}

// Loads the parameter blob after checking that the on-disk tensor layout
// matches the freshly constructed model.
template <typename Scalar>
void load_params(const BundleContents& b, ParamStore<Scalar>& params) {
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(b.verified_file("params.index.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptionError("bundle index: bad JSON: " + std::string(e.what()));
  }
  try {
    if (index.at("format_version").get<int>() != kBundleFormatVersion) {
      throw IncompatibilityError("bundle index: format version mismatch");
    }
    const auto& tensors = index.at("tensors");
    const auto& entries = params.entries();
    if (tensors.size() != entries.size()) {
      throw CorruptionError("bundle index: tensor count mismatch");
    }
    long long offset = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& t = tensors.at(i);
      if (t.at("name").get<std::string>() != entries[i].name ||
          t.at("group").get<std::string>() != entries[i].group ||
          t.at("rows").get<long long>() != entries[i].value.rows() ||
          t.at("cols").get<long long>() != entries[i].value.cols() ||
          t.at("offset").get<long long>() != offset) {
        throw CorruptionError("bundle index: tensor " + entries[i].name +
                              " does not match the configured architecture");
      }
      offset += static_cast<long long>(entries[i].value.size()) * 4;
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("bundle index: " + std::string(e.what()));
  }

  std::string blob = b.verified_file("params.bin");
  if (blob.size() !=
      static_cast<std::size_t>(params.total_elements()) * 4) {
    throw CorruptionError("bundle: params.bin holds " +
                          std::to_string(blob.size()) + " bytes, expected " +
                          std::to_string(params.total_elements() * 4));
  }
  params.from_f32_bytes(
      std::vector<std::uint8_t>(blob.begin(), blob.end()));
}

template <typename Model>
std::vector<std::array<double, 2>> run_texts(
    const Model& model, const Dataset<typename Model::Example>& ds,
    int batch_size) {
  return predict_dataset(model, ds, batch_size);
}

}  // namespace

std::vector<std::array<double, 2>> NGramClassifier::predict_texts(
    const std::vector<std::string>& texts, int batch_size) const {
  Dataset<NGramLinearModel<float>::Example> ds;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ds.examples.push_back(model_.featurize(texts[i]));
    ds.labels.push_back(0);
    ds.ids.push_back(std::to_string(i));
  }
  return run_texts(model_, ds, batch_size);
}

void NGramClassifier::save(const std::filesystem::path& dir) const {
  write_bundle(dir, family(), seed_, 0, ngram_config_to_json(model_.config()),
               model_.params(), {});
}

std::vector<std::array<double, 2>> BiLstmClassifier::predict_texts(
    const std::vector<std::string>& texts, int batch_size) const {
  Dataset<BiLstmModel<float>::Example> ds;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ds.examples.push_back(BiLstmModel<float>::featurize(
        texts[i], vocab_, static_cast<std::size_t>(max_seq_len_)));
    ds.labels.push_back(0);
    ds.ids.push_back(std::to_string(i));
  }
  return run_texts(model_, ds, batch_size);
}

void BiLstmClassifier::save(const std::filesystem::path& dir) const {
  write_bundle(dir, family(), seed_, max_seq_len_,
               bilstm_config_to_json(model_.config()), model_.params(),
               {{"vocab.json", vocab_.to_json()}});
}

std::vector<std::array<double, 2>> TransformerClassifier::predict_texts(
    const std::vector<std::string>& texts, int batch_size) const {
  Dataset<TransformerModel<float>::Example> ds;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ds.examples.push_back(TransformerModel<float>::featurize(
        texts[i], tokenizer_, static_cast<std::size_t>(max_seq_len_)));
    ds.labels.push_back(0);
    ds.ids.push_back(std::to_string(i));
  }
  return run_texts(model_, ds, batch_size);
}

void TransformerClassifier::save(const std::filesystem::path& dir) const {
  write_bundle(dir, family(), seed_, max_seq_len_,
               transformer_config_to_json(model_.config()), model_.params(),
               {{"tokenizer.json", tokenizer_.to_json()}});
}

std::unique_ptr<Classifier> Classifier::load(
    const std::filesystem::path& dir) {
  BundleContents b = open_bundle(dir);
  if (b.family == "ngram") {
    NGramLinearModel<float> model(ngram_config_from_json(b.config), b.seed);
    load_params(b, model.params());
    return std::make_unique<NGramClassifier>(std::move(model), b.seed);
  }
  if (b.family == "bilstm") {
    WordVocab vocab = WordVocab::from_json(b.verified_file("vocab.json"));
    BiLstmModel<float> model(bilstm_config_from_json(b.config), b.seed,
                             vocab.rows());
    load_params(b, model.params());
    return std::make_unique<BiLstmClassifier>(std::move(model),
                                              std::move(vocab), b.max_seq_len,
                                              b.seed);
  }
  if (b.family == "transformer") {
    SubwordTokenizer tokenizer =
        SubwordTokenizer::from_json(b.verified_file("tokenizer.json"));
    TransformerConfig cfg = transformer_config_from_json(b.config);
    if (cfg.vocab_size != static_cast<int>(tokenizer.vocab_size())) {
      throw CorruptionError(
          "bundle: tokenizer vocabulary does not match the configured size");
    }
    TransformerModel<float> model(cfg, b.seed);
    load_params(b, model.params());
    return std::make_unique<TransformerClassifier>(
        std::move(model), std::move(tokenizer), b.max_seq_len, b.seed);
  }
  throw FormatError("bundle manifest: unknown family " + b.family);
}

}  // namespace biasdet
