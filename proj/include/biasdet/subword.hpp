#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace biasdet {

// Fixed-length subword id sequence with its attention mask.
struct EncodedSequence {
  std::vector<std::int32_t> ids;   // length == max_len
  std::vector<std::int8_t> mask;   // 1s followed by 0s
  bool truncated = false;
};

// Byte-pair subword tokenizer trained on word frequencies. Words are split
// into codepoint symbols plus an end-of-word marker; merges are learned
// greedily with ties in pair frequency broken by lexicographic order of the
// pair. Training is a pure function of the corpus multiset and target size.
class SubwordTokenizer {
 public:
  static constexpr const char* kEndOfWord = "</w>";
  static constexpr std::int32_t kPadId = 0;
  static constexpr std::int32_t kUnkId = 1;
  static constexpr std::int32_t kStartId = 2;
  static constexpr std::int32_t kSepId = 3;
  static constexpr std::int32_t kSpecialCount = 4;

  // Greedy BPE training. target_vocab_size counts specials + base charset +
  // merges; throws ConfigError when it cannot cover charset + specials.
  static SubwordTokenizer train(const std::vector<std::string>& texts,
                                std::size_t target_vocab_size);

  // Encodes to [start] + subwords + [separator], truncating subwords from
  // the right (separator kept), then pads to max_len.
  EncodedSequence encode(std::string_view text, std::size_t max_len = 50) const;

  // Subword ids for one normalized word (no specials, no padding).
  std::vector<std::int32_t> encode_word(const std::string& word) const;

  // Inverse of encode for the unpadded, untruncated portion: joins subwords,
  // turning end-of-word markers into single spaces.
  std::string decode(const std::vector<std::int32_t>& ids) const;

  std::size_t vocab_size() const { return id_to_token_.size(); }
  const std::vector<std::string>& charset() const { return charset_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const {
    return merges_;
  }
  const std::string& token_of(std::int32_t id) const {
    return id_to_token_.at(static_cast<std::size_t>(id));
  }

  std::string to_json() const;
  static SubwordTokenizer from_json(const std::string& text);

 private:
  SubwordTokenizer() = default;
  void build_index();

  std::vector<std::string> charset_;  // sorted, includes the end-of-word mark
  std::vector<std::pair<std::string, std::string>> merges_;
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int32_t> token_to_id_;
};

}  // namespace biasdet
