#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace biasdet {

using TokenSequence = std::vector<std::string>;

// NFC-normalize, lowercase, split on whitespace, then detach leading and
// trailing ASCII punctuation characters as separate tokens. Interior
// punctuation ("don't", "U.S") stays attached.
TokenSequence normalize_and_tokenize(std::string_view text);

// Hashed bag of n-grams: sorted unique bucket ids in [0, buckets).
// Each n-gram (1 <= n <= n_max) is space-joined and hashed with FNV-1a 64,
// then reduced mod the bucket count.
struct NGramFeatureVector {
  std::vector<std::uint32_t> indices;  // strictly increasing
  std::uint32_t buckets = 0;
};

NGramFeatureVector hash_ngram_features(const TokenSequence& tokens, int n_max,
                                       std::uint32_t buckets);

}  // namespace biasdet
