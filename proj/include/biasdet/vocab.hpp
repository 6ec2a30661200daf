#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace biasdet {

// Word-level vocabulary for the recurrent model. Ids 0 and 1 are reserved
// for padding and unknown words; real tokens start at 2, ordered by
// descending corpus frequency with ties broken alphabetically.
struct WordVocab {
  static constexpr std::int32_t kPadId = 0;
  static constexpr std::int32_t kUnkId = 1;
  static constexpr std::int32_t kSpecialCount = 2;

  std::vector<std::string> tokens;
  std::unordered_map<std::string, std::int32_t> index;

  static WordVocab build(const std::vector<std::string>& texts);

  std::int32_t rows() const {
    return static_cast<std::int32_t>(tokens.size()) + kSpecialCount;
  }

  std::int32_t id_of(const std::string& token) const;

  // Token ids after normalization, truncated to max_len (no padding).
  std::vector<std::int32_t> encode_ids(std::string_view text,
                                       std::size_t max_len) const;

  std::string to_json() const;
  static WordVocab from_json(const std::string& text);
};

}  // namespace biasdet
