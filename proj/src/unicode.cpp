#include "biasdet/unicode.hpp"

#include <algorithm>
#include <cstdint>

namespace biasdet::uni {

namespace {

#include "unicode_tables.inc"

constexpr char32_t kReplacement = 0xFFFD;

// Hangul syllable composition constants (UAX #15 section 3.12).
constexpr char32_t kHangulSBase = 0xAC00;
constexpr char32_t kHangulLBase = 0x1100;
constexpr char32_t kHangulVBase = 0x1161;
constexpr char32_t kHangulTBase = 0x11A7;
constexpr int kHangulLCount = 19;
constexpr int kHangulVCount = 21;
constexpr int kHangulTCount = 28;
constexpr int kHangulNCount = kHangulVCount * kHangulTCount;
constexpr int kHangulSCount = kHangulLCount * kHangulNCount;

std::uint8_t combining_class(char32_t cp) {
  std::size_t lo = 0, hi = std::size(kCccRuns);
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (kCccRuns[mid].last < cp) {
      lo = mid + 1;
    } else if (kCccRuns[mid].first > cp) {
      hi = mid;
    } else {
      return kCccRuns[mid].ccc;
    }
  }
  return 0;
}

const DecompEntry* find_decomp(char32_t cp) {
  std::size_t lo = 0, hi = std::size(kDecomp);
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (kDecomp[mid].cp < cp) {
      lo = mid + 1;
    } else if (kDecomp[mid].cp > cp) {
      hi = mid;
    } else {
      return &kDecomp[mid];
    }
  }
  return nullptr;
}

char32_t compose_pair(char32_t a, char32_t b) {
  // Hangul LV and LVT composition.
  if (a >= kHangulLBase && a < kHangulLBase + kHangulLCount &&
      b >= kHangulVBase && b < kHangulVBase + kHangulVCount) {
    return kHangulSBase +
           ((a - kHangulLBase) * kHangulVCount + (b - kHangulVBase)) *
               kHangulTCount;
  }
  if (a >= kHangulSBase && a < kHangulSBase + kHangulSCount &&
      (a - kHangulSBase) % kHangulTCount == 0 && b > kHangulTBase &&
      b < kHangulTBase + kHangulTCount) {
    return a + (b - kHangulTBase);
  }
  std::size_t lo = 0, hi = std::size(kCompPairs);
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    const CompPair& p = kCompPairs[mid];
    if (p.first < a || (p.first == a && p.second < b)) {
      lo = mid + 1;
    } else if (p.first > a || p.second > b) {
      hi = mid;
    } else {
      return p.composed;
    }
  }
  return 0;
}

void decompose_into(char32_t cp, std::vector<char32_t>& out) {
  if (cp >= kHangulSBase && cp < kHangulSBase + kHangulSCount) {
    const int index = static_cast<int>(cp - kHangulSBase);
    out.push_back(kHangulLBase + index / kHangulNCount);
    out.push_back(kHangulVBase + (index % kHangulNCount) / kHangulTCount);
    if (index % kHangulTCount != 0) {
      out.push_back(kHangulTBase + index % kHangulTCount);
    }
    return;
  }
  if (const DecompEntry* e = find_decomp(cp)) {
    for (std::size_t i = 0; i < e->length; ++i) {
      out.push_back(kDecompPool[e->offset + i]);
    }
    return;
  }
  out.push_back(cp);
}

// Stable sort of combining marks by class (canonical ordering).
void canonical_order(std::vector<char32_t>& cps) {
  std::size_t i = 0;
  while (i < cps.size()) {
    if (combining_class(cps[i]) == 0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < cps.size() && combining_class(cps[j]) != 0) ++j;
    std::stable_sort(cps.begin() + i, cps.begin() + j,
                     [](char32_t a, char32_t b) {
                       return combining_class(a) < combining_class(b);
                     });
    i = j;
  }
}

}  // namespace

std::vector<char32_t> decode_utf8(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const unsigned char b0 = static_cast<unsigned char>(text[i]);
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    int len;
    char32_t cp;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > n) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const unsigned char bk = static_cast<unsigned char>(text[i + k]);
      if ((bk & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (bk & 0x3F);
    }
    // Reject overlong forms, surrogates and out-of-range values.
    if (!ok || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF) ||
        (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000)) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode_utf8(const std::vector<char32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) append_utf8(out, cp);
  return out;
}

std::vector<char32_t> nfc(const std::vector<char32_t>& cps) {
  std::vector<char32_t> d;
  d.reserve(cps.size());
  for (char32_t cp : cps) decompose_into(cp, d);
  canonical_order(d);

  // Recomposition. A character is blocked from the last starter if it does
  // not directly follow it and the previously appended character has a
  // combining class >= its own (UAX #15 D115).
  std::vector<char32_t> out;
  out.reserve(d.size());
  std::ptrdiff_t last_starter = -1;
  for (char32_t cp : d) {
    const int ccc = combining_class(cp);
    if (last_starter >= 0) {
      const bool directly_follows =
          static_cast<std::ptrdiff_t>(out.size()) - 1 == last_starter;
      const bool blocked =
          !directly_follows && combining_class(out.back()) >= ccc;
      if (!blocked) {
        if (char32_t comp = compose_pair(out[last_starter], cp)) {
          out[last_starter] = comp;
          continue;
        }
      }
    }
    if (ccc == 0) last_starter = static_cast<std::ptrdiff_t>(out.size());
    out.push_back(cp);
  }
  return out;
}

std::string nfc(std::string_view text) {
  return encode_utf8(nfc(decode_utf8(text)));
}

std::vector<char32_t> to_lower(const std::vector<char32_t>& cps) {
  std::vector<char32_t> out;
  out.reserve(cps.size());
  for (char32_t cp : cps) {
    std::size_t lo = 0, hi = std::size(kLower);
    const LowerEntry* hit = nullptr;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (kLower[mid].cp < cp) {
        lo = mid + 1;
      } else if (kLower[mid].cp > cp) {
        hi = mid;
      } else {
        hit = &kLower[mid];
        break;
      }
    }
    if (hit) {
      for (std::size_t k = 0; k < hit->length; ++k) out.push_back(hit->to[k]);
    } else {
      out.push_back(cp);
    }
  }
  return out;
}

std::string to_lower(std::string_view text) {
  return encode_utf8(to_lower(decode_utf8(text)));
}

bool is_whitespace(char32_t cp) {
  switch (cp) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case 0x0B:
    case 0x0C:
    case 0x85:    // NEL
    case 0xA0:    // NBSP
    case 0x1680:  // Ogham space
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

std::string nfc_collapse_ws(std::string_view text) {
  std::vector<char32_t> cps = nfc(decode_utf8(text));
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  bool seen_any = false;
  for (char32_t cp : cps) {
    if (is_whitespace(cp)) {
      pending_space = seen_any;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    append_utf8(out, cp);
    seen_any = true;
  }
  return out;
}

}  // namespace biasdet::uni
