#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace biasdet::uni {

// UTF-8 <-> codepoints. Invalid byte sequences decode to U+FFFD, one
// replacement per bogus byte, so parsing never throws on dirty input.
std::vector<char32_t> decode_utf8(std::string_view text);
std::string encode_utf8(const std::vector<char32_t>& cps);
void append_utf8(std::string& out, char32_t cp);

// Canonical composition (NFC) per UAX #15: full canonical decomposition,
// canonical reordering, then recomposition with Hangul handled
// algorithmically.
std::vector<char32_t> nfc(const std::vector<char32_t>& cps);
std::string nfc(std::string_view text);

// Context-free full lowercase mapping (one codepoint may expand to up to
// three).
std::vector<char32_t> to_lower(const std::vector<char32_t>& cps);
std::string to_lower(std::string_view text);

bool is_whitespace(char32_t cp);

// NFC + whitespace collapsed to single ASCII spaces + trimmed. Case is
// preserved; this is the canonical key used for sentence comparisons.
std::string nfc_collapse_ws(std::string_view text);

}  // namespace biasdet::uni
