#include "biasdet/embedding.hpp"

#include <charconv>
#include <fstream>
#include <unordered_map>

#include "biasdet/errors.hpp"
#include "biasdet/rng.hpp"

namespace biasdet {

EmbeddingMatrix load_embedding_file(const std::string& path,
                                    const std::vector<std::string>& vocab,
                                    int dimension, std::uint64_t seed) {
  if (dimension < 1) throw ConfigError("embeddings: dimension must be >= 1");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  std::unordered_map<std::string, std::size_t> index;
  index.reserve(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);

  EmbeddingMatrix out;
  out.rows.setZero(static_cast<Eigen::Index>(vocab.size()), dimension);
  std::vector<bool> filled(vocab.size(), false);

  std::string line;
  std::size_t line_no = 0;
  std::vector<float> values(static_cast<std::size_t>(dimension));
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const std::size_t token_end = line.find(' ');
    if (token_end == std::string::npos) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected token followed by " +
                        std::to_string(dimension) + " values");
    }
    const std::string token = line.substr(0, token_end);

    std::size_t pos = token_end;
    int count = 0;
    const char* end = line.data() + line.size();
    while (pos < line.size()) {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      if (pos >= line.size()) break;
      if (count >= dimension) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": more than " + std::to_string(dimension) +
                          " values");
      }
      float v = 0.0f;
      const auto res = std::from_chars(line.data() + pos, end, v);
      if (res.ec != std::errc()) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": bad number");
      }
      values[static_cast<std::size_t>(count)] = v;
      ++count;
      pos = static_cast<std::size_t>(res.ptr - line.data());
    }
    if (count != dimension) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(dimension) + " values, got " +
                        std::to_string(count));
    }

    const auto it = index.find(token);
    if (it == index.end()) continue;  // file token outside the vocabulary
    for (int d = 0; d < dimension; ++d) {
      out.rows(static_cast<Eigen::Index>(it->second), d) =
          values[static_cast<std::size_t>(d)];
    }
    if (!filled[it->second]) {
      filled[it->second] = true;
      ++out.found;
    }
  }
  if (in.bad()) throw IoError("read failure: " + path);

  Rng rng(seed);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (filled[i]) continue;
    ++out.missing;
    for (int d = 0; d < dimension; ++d) {
      out.rows(static_cast<Eigen::Index>(i), d) =
          static_cast<float>(rng.normal(0.0, 0.1));
    }
  }
  return out;
}

}  // namespace biasdet
