#include "biasdet/tokenize.hpp"

#include <algorithm>

#include "biasdet/errors.hpp"
#include "biasdet/hash.hpp"
#include "biasdet/unicode.hpp"

namespace biasdet {

namespace {

bool is_ascii_punct(char32_t cp) {
  return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
         (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
}

void emit_word(const std::vector<char32_t>& word, TokenSequence& out) {
  std::size_t begin = 0;
  std::size_t end = word.size();
  std::vector<char32_t> leading;
  while (begin < end && is_ascii_punct(word[begin])) {
    leading.push_back(word[begin]);
    ++begin;
  }
  std::vector<char32_t> trailing;
  while (end > begin && is_ascii_punct(word[end - 1])) {
    trailing.push_back(word[end - 1]);
    --end;
  }
  std::reverse(trailing.begin(), trailing.end());

  std::string tok;
  for (char32_t cp : leading) {
    tok.clear();
    uni::append_utf8(tok, cp);
    out.push_back(tok);
  }
  if (end > begin) {
    tok.clear();
    for (std::size_t i = begin; i < end; ++i) uni::append_utf8(tok, word[i]);
    out.push_back(tok);
  }
  for (char32_t cp : trailing) {
    tok.clear();
    uni::append_utf8(tok, cp);
    out.push_back(tok);
  }
}

}  // namespace

TokenSequence normalize_and_tokenize(std::string_view text) {
  const std::vector<char32_t> cps =
      uni::to_lower(uni::nfc(uni::decode_utf8(text)));
  TokenSequence out;
  std::vector<char32_t> word;
  for (char32_t cp : cps) {
    if (uni::is_whitespace(cp)) {
      if (!word.empty()) {
        emit_word(word, out);
        word.clear();
      }
    } else {
      word.push_back(cp);
    }
  }
  if (!word.empty()) emit_word(word, out);
  return out;
}

NGramFeatureVector hash_ngram_features(const TokenSequence& tokens, int n_max,
                                       std::uint32_t buckets) {
  if (n_max < 1) throw ConfigError("hash_ngram_features: n_max must be >= 1");
  if (buckets < 2) throw ConfigError("hash_ngram_features: buckets must be >= 2");

  NGramFeatureVector out;
  out.buckets = buckets;
  std::string joined;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    joined.clear();
    for (int n = 1; n <= n_max; ++n) {
      const std::size_t j = i + static_cast<std::size_t>(n) - 1;
      if (j >= tokens.size()) break;
      if (n > 1) joined.push_back(' ');
      joined += tokens[j];
      out.indices.push_back(
          static_cast<std::uint32_t>(fnv1a64(joined) % buckets));
    }
  }
  std::sort(out.indices.begin(), out.indices.end());
  out.indices.erase(std::unique(out.indices.begin(), out.indices.end()),
                    out.indices.end());
  return out;
}

}  // namespace biasdet
