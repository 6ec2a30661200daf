#!/usr/bin/env python3
"""Regenerates src/unicode_tables.inc from Python's bundled Unicode database.

The tables cover what text normalization needs: canonical combining classes,
recursively expanded canonical decompositions (Hangul excluded, it is handled
algorithmically), primary composition pairs, and per-codepoint lowercase
mappings. Run from the repository root:

    python3 tools/gen_unicode_tables.py > src/unicode_tables.inc
"""

import sys
import unicodedata

MAX_CP = 0x110000
HANGUL_S_BASE = 0xAC00
HANGUL_S_COUNT = 11172


def is_hangul_syllable(cp):
    return HANGUL_S_BASE <= cp < HANGUL_S_BASE + HANGUL_S_COUNT


def canonical_decomposition(cp):
    """One-level canonical (non-compatibility) decomposition, or None."""
    if is_hangul_syllable(cp):
        return None
    raw = unicodedata.decomposition(chr(cp))
    if not raw or raw.startswith("<"):
        return None
    return [int(f, 16) for f in raw.split()]


def full_decomposition(cp, memo):
    if cp in memo:
        return memo[cp]
    one = canonical_decomposition(cp)
    if one is None:
        memo[cp] = [cp]
        return memo[cp]
    out = []
    for part in one:
        out.extend(full_decomposition(part, memo))
    memo[cp] = out
    return out


def main():
    out = sys.stdout

    # Combining classes, as [start, end] runs of equal nonzero class.
    ccc_runs = []
    run = None
    for cp in range(MAX_CP):
        c = unicodedata.combining(chr(cp))
        if c:
            if run and run[1] == cp - 1 and run[2] == c:
                run = (run[0], cp, c)
                ccc_runs[-1] = run
            else:
                run = (cp, cp, c)
                ccc_runs.append(run)
        else:
            run = None

    # Fully expanded canonical decompositions.
    memo = {}
    decomp_entries = []  # (cp, [codepoints])
    for cp in range(MAX_CP):
        if canonical_decomposition(cp) is not None:
            decomp_entries.append((cp, full_decomposition(cp, memo)))

    # Primary composites: two-codepoint canonical decompositions that NFC
    # recombines (this bakes in the composition exclusions).
    comp_pairs = []
    for cp, _ in decomp_entries:
        one = canonical_decomposition(cp)
        if len(one) != 2:
            continue
        a, b = one
        if unicodedata.combining(chr(a)):
            continue
        if unicodedata.normalize("NFC", chr(a) + chr(b)) == chr(cp):
            comp_pairs.append((a, b, cp))
    comp_pairs.sort()

    # Lowercase mappings (context-free, full mapping, at most 3 codepoints).
    lower_entries = []
    for cp in range(MAX_CP):
        ch = chr(cp)
        lo = ch.lower()
        if lo != ch:
            cps = [ord(x) for x in lo]
            assert len(cps) <= 3, hex(cp)
            lower_entries.append((cp, cps))

    out.write("// Generated by tools/gen_unicode_tables.py (Unicode %s). Do not edit.\n\n"
              % unicodedata.unidata_version)

    out.write("struct CccRun { char32_t first; char32_t last; uint8_t ccc; };\n")
    out.write("inline constexpr CccRun kCccRuns[] = {\n")
    for first, last, c in ccc_runs:
        out.write("  {0x%X, 0x%X, %d},\n" % (first, last, c))
    out.write("};\n\n")

    # Decompositions stored as offsets into one flat pool.
    pool = []
    out.write("struct DecompEntry { char32_t cp; uint32_t offset; uint8_t length; };\n")
    out.write("inline constexpr DecompEntry kDecomp[] = {\n")
    for cp, cps in decomp_entries:
        out.write("  {0x%X, %d, %d},\n" % (cp, len(pool), len(cps)))
        pool.extend(cps)
    out.write("};\n\n")
    out.write("inline constexpr char32_t kDecompPool[] = {\n")
    for i in range(0, len(pool), 12):
        out.write("  " + ", ".join("0x%X" % c for c in pool[i:i + 12]) + ",\n")
    out.write("};\n\n")

    out.write("struct CompPair { char32_t first; char32_t second; char32_t composed; };\n")
    out.write("inline constexpr CompPair kCompPairs[] = {\n")
    for a, b, c in comp_pairs:
        out.write("  {0x%X, 0x%X, 0x%X},\n" % (a, b, c))
    out.write("};\n\n")

    out.write("struct LowerEntry { char32_t cp; char32_t to[3]; uint8_t length; };\n")
    out.write("inline constexpr LowerEntry kLower[] = {\n")
    for cp, cps in lower_entries:
        padded = cps + [0] * (3 - len(cps))
        out.write("  {0x%X, {0x%X, 0x%X, 0x%X}, %d},\n"
                  % (cp, padded[0], padded[1], padded[2], len(cps)))
    out.write("};\n")


if __name__ == "__main__":
    main()
