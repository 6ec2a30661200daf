#include "biasdet/subword.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "biasdet/errors.hpp"
#include "biasdet/tokenize.hpp"
#include "biasdet/unicode.hpp"

namespace biasdet {

namespace {

using nlohmann::json;

std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> symbols;
  for (char32_t cp : uni::decode_utf8(word)) {
    std::string s;
    uni::append_utf8(s, cp);
    symbols.push_back(std::move(s));
  }
  symbols.push_back(SubwordTokenizer::kEndOfWord);
  return symbols;
}

void apply_merge(std::vector<std::string>& symbols, const std::string& a,
                 const std::string& b) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < symbols.size();) {
    if (r + 1 < symbols.size() && symbols[r] == a && symbols[r + 1] == b) {
      symbols[w++] = a + b;
      r += 2;
    } else {
      if (w != r) symbols[w] = std::move(symbols[r]);
      ++w;
      ++r;
    }
  }
  symbols.resize(w);
}

}  // namespace

SubwordTokenizer SubwordTokenizer::train(const std::vector<std::string>& texts,
                                         std::size_t target_vocab_size) {
  if (texts.empty()) throw ConfigError("subword training: empty corpus");

  // Word frequencies over the normalized corpus.
  std::map<std::string, std::uint64_t> word_freq;
  for (const auto& text : texts) {
    for (auto& tok : normalize_and_tokenize(text)) ++word_freq[tok];
  }

  std::set<std::string> charset;
  charset.insert(kEndOfWord);
  for (const auto& [word, freq] : word_freq) {
    for (char32_t cp : uni::decode_utf8(word)) {
      std::string s;
      uni::append_utf8(s, cp);
      charset.insert(std::move(s));
    }
  }

  SubwordTokenizer tok;
  tok.charset_.assign(charset.begin(), charset.end());

  const std::size_t floor_size = tok.charset_.size() + kSpecialCount;
  if (target_vocab_size < floor_size) {
    throw ConfigError("subword training: target vocab " +
                      std::to_string(target_vocab_size) +
                      " is below charset + specials (" +
                      std::to_string(floor_size) + ")");
  }

  std::vector<std::vector<std::string>> words;
  std::vector<std::uint64_t> freqs;
  words.reserve(word_freq.size());
  for (const auto& [word, freq] : word_freq) {
    words.push_back(word_symbols(word));
    freqs.push_back(freq);
  }

  // Token strings must stay unique; a merge may not reproduce a special
  // literal, a charset symbol, or an earlier merge.
  std::set<std::string> taken(charset.begin(), charset.end());
  taken.insert({"<pad>", "<unk>", "<s>", "</s>"});

  std::size_t budget = target_vocab_size - floor_size;
  while (budget > 0) {
    // Count adjacent symbol pairs, weighted by word frequency.
    std::map<std::pair<std::string, std::string>, std::uint64_t> pair_count;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& symbols = words[w];
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        pair_count[{symbols[i], symbols[i + 1]}] += freqs[w];
      }
    }
    // Max count; the std::map iteration order makes the lexicographically
    // smallest pair win ties.
    const std::pair<std::string, std::string>* best = nullptr;
    std::uint64_t best_count = 0;
    for (const auto& [pair, count] : pair_count) {
      if (count > best_count && !taken.count(pair.first + pair.second)) {
        best = &pair;
        best_count = count;
      }
    }
    if (!best || best_count < 2) break;  // nothing left worth merging

    tok.merges_.push_back(*best);
    taken.insert(best->first + best->second);
    for (auto& symbols : words) apply_merge(symbols, best->first, best->second);
    --budget;
  }

  tok.build_index();
  return tok;
}

void SubwordTokenizer::build_index() {
  id_to_token_.clear();
  token_to_id_.clear();
  id_to_token_ = {"<pad>", "<unk>", "<s>", "</s>"};
  for (const auto& c : charset_) id_to_token_.push_back(c);
  for (const auto& [a, b] : merges_) id_to_token_.push_back(a + b);
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    // Specials keep their reserved ids if a literal collides.
    token_to_id_.emplace(id_to_token_[i], static_cast<std::int32_t>(i));
  }
}

std::vector<std::int32_t> SubwordTokenizer::encode_word(
    const std::string& word) const {
  std::vector<std::string> symbols = word_symbols(word);
  for (const auto& [a, b] : merges_) apply_merge(symbols, a, b);
  std::vector<std::int32_t> ids;
  ids.reserve(symbols.size());
  for (const auto& s : symbols) {
    auto it = token_to_id_.find(s);
    ids.push_back(it == token_to_id_.end() ? kUnkId : it->second);
  }
  return ids;
}

EncodedSequence SubwordTokenizer::encode(std::string_view text,
                                         std::size_t max_len) const {
  if (max_len < 2) throw ConfigError("encode: max_len must be >= 2");

  std::vector<std::int32_t> body;
  for (const auto& word : normalize_and_tokenize(text)) {
    const auto ids = encode_word(word);
    body.insert(body.end(), ids.begin(), ids.end());
  }

  EncodedSequence seq;
  seq.truncated = body.size() > max_len - 2;
  if (seq.truncated) body.resize(max_len - 2);

  seq.ids.reserve(max_len);
  seq.ids.push_back(kStartId);
  seq.ids.insert(seq.ids.end(), body.begin(), body.end());
  seq.ids.push_back(kSepId);
  const std::size_t real = seq.ids.size();
  seq.ids.resize(max_len, kPadId);
  seq.mask.assign(max_len, 0);
  std::fill(seq.mask.begin(), seq.mask.begin() + static_cast<long>(real), 1);
  return seq;
}

std::string SubwordTokenizer::decode(
    const std::vector<std::int32_t>& ids) const {
  std::string joined;
  for (std::int32_t id : ids) {
    if (id == kPadId || id == kStartId || id == kSepId) continue;
    joined += token_of(id);
  }
  std::string out;
  const std::string eow = kEndOfWord;
  std::size_t pos = 0;
  while (pos < joined.size()) {
    const std::size_t hit = joined.find(eow, pos);
    if (hit == std::string::npos) {
      out += joined.substr(pos);
      break;
    }
    out += joined.substr(pos, hit - pos);
    pos = hit + eow.size();
    if (pos < joined.size()) out.push_back(' ');
  }
  return out;
}

std::string SubwordTokenizer::to_json() const {
  json merges = json::array();
  for (const auto& [a, b] : merges_) merges.push_back(json::array({a, b}));
  json j{{"format_version", 1},
         {"specials",
          {{"pad", kPadId}, {"unk", kUnkId}, {"start", kStartId},
           {"sep", kSepId}}},
         {"charset", charset_},
         {"merges", merges}};
  return j.dump(2) + "\n";
}

SubwordTokenizer SubwordTokenizer::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("subword tokenizer JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw IncompatibilityError(
          "subword tokenizer JSON: unsupported format_version");
    }
    SubwordTokenizer tok;
    tok.charset_ = j.at("charset").get<std::vector<std::string>>();
    std::set<std::string> known(tok.charset_.begin(), tok.charset_.end());
    known.insert({"<pad>", "<unk>", "<s>", "</s>"});
    for (const auto& m : j.at("merges")) {
      const auto a = m.at(0).get<std::string>();
      const auto b = m.at(1).get<std::string>();
      if (!known.count(a) || !known.count(b)) {
        throw FormatError("subword tokenizer JSON: merge (" + a + ", " + b +
                          ") references unknown parts");
      }
      if (!known.insert(a + b).second) {
        throw FormatError("subword tokenizer JSON: duplicate token '" + a + b +
                          "'");
      }
      tok.merges_.emplace_back(a, b);
    }
    tok.build_index();
    return tok;
  } catch (const json::exception& e) {
    throw FormatError(std::string("subword tokenizer JSON: ") + e.what());
  }
}

}  // namespace biasdet
