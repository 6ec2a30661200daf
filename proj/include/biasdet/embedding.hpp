#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace biasdet {

// Embedding rows for a fixed vocabulary, loaded from a plain-text
// "token v1 ... vd" file. Vocabulary tokens absent from the file get a
// seeded normal row (mean 0, sigma 0.1); file tokens outside the vocabulary
// are skipped.
struct EmbeddingMatrix {
  Eigen::MatrixXf rows;  // one row per vocabulary token
  std::size_t found = 0;
  std::size_t missing = 0;
};

EmbeddingMatrix load_embedding_file(const std::string& path,
                                    const std::vector<std::string>& vocab,
                                    int dimension, std::uint64_t seed);

}  // namespace biasdet
