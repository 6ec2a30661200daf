#include "biasdet/vocab.hpp"

#include <algorithm>
#include <map>

#include "biasdet/errors.hpp"
#include "biasdet/tokenize.hpp"
#include "json.hpp"

namespace biasdet {

WordVocab WordVocab::build(const std::vector<std::string>& texts) {
  std::map<std::string, long> counts;
  for (const std::string& text : texts) {
    for (const std::string& token : normalize_and_tokenize(text)) {
      ++counts[token];
    }
  }
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  WordVocab v;
  v.tokens.reserve(ranked.size());
  for (const auto& [token, count] : ranked) {
    v.index.emplace(token, static_cast<std::int32_t>(v.tokens.size()) +
                               kSpecialCount);
    v.tokens.push_back(token);
  }
  return v;
}

std::int32_t WordVocab::id_of(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? kUnkId : it->second;
}

std::vector<std::int32_t> WordVocab::encode_ids(std::string_view text,
                                                std::size_t max_len) const {
  std::vector<std::int32_t> ids;
  for (const std::string& token : normalize_and_tokenize(text)) {
    if (ids.size() >= max_len) break;
    ids.push_back(id_of(token));
  }
  return ids;
}

std::string WordVocab::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["tokens"] = tokens;
  return j.dump(2) + "\n";
}

WordVocab WordVocab::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("word vocab: bad JSON: ") + e.what());
  }
  if (!j.contains("format_version") || !j["format_version"].is_number_integer() ||
      j["format_version"].get<int>() != 1) {
    throw IncompatibilityError("word vocab: unsupported format_version");
  }
  if (!j.contains("tokens") || !j["tokens"].is_array()) {
    throw FormatError("word vocab: missing tokens array");
  }
  WordVocab v;
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) throw FormatError("word vocab: non-string token");
    const std::string s = t.get<std::string>();
    if (v.index.count(s) != 0) {
      throw FormatError("word vocab: duplicate token " + s);
    }
    v.index.emplace(s, static_cast<std::int32_t>(v.tokens.size()) +
                           kSpecialCount);
    v.tokens.push_back(s);
  }
  return v;
}

}  // namespace biasdet
