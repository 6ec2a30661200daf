#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace biasdet {

// One aligned revision pair: the sentence before the neutralizing edit and
// its edited counterpart.
struct SentencePair {
  std::string revision_id;
  std::string pre;   // biased side
  std::string post;  // neutralized side
};

struct LabeledExample {
  std::string id;     // revision_id plus side suffix
  std::string text;
  int label = 0;      // 1 = biased, 0 = neutral
  std::string group;  // originating revision_id
};

struct ParseDiagnostic {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct ParsedPairs {
  std::vector<SentencePair> pairs;
  std::vector<ParseDiagnostic> rejected;
};

// Line-oriented TSV: revision_id <TAB> pre <TAB> post, extra fields ignored.
// Malformed lines are reported, never silently dropped. Throws IoError if the
// stream cannot be read and FormatError if a non-empty input yields zero
// well-formed lines.
ParsedPairs parse_pairs_tsv(std::istream& in);
ParsedPairs parse_pairs_tsv_file(const std::string& path);

struct DedupePolicy {
  bool drop_identical_pairs = true;  // pre == post after normalization
  bool drop_duplicate_texts = true;  // same normalized text + label
};

struct ConversionStats {
  std::size_t identical_pair_dropped = 0;
  std::size_t duplicate_dropped = 0;
};

// Each pair yields up to two examples (pre -> 1, post -> 0). Pairs whose
// sides are equal after NFC + whitespace collapse yield none; duplicate
// normalized texts with the same label keep the first occurrence.
std::vector<LabeledExample> pairs_to_examples(
    const std::vector<SentencePair>& pairs, const DedupePolicy& policy,
    ConversionStats* stats = nullptr);

enum class SplitGrouping { kPair, kSentence };

struct SplitConfig {
  double ratio = 0.9;          // train fraction of the train/test cut
  double val_fraction = 0.1;   // carved from train after the cut
  std::uint64_t seed = 0;
  SplitGrouping grouping = SplitGrouping::kPair;
};

struct DatasetSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
  SplitConfig config;
};

// Deterministic split: units (examples or revision groups) are stably sorted
// by id, shuffled with the seed, then cut test-first and validation out of
// the remaining train pool. Throws ConfigError for out-of-range fractions or
// when a part with a nonzero fraction ends up empty.
DatasetSplit split_dataset(const std::vector<LabeledExample>& examples,
                           const SplitConfig& config);

// JSON manifest listing example ids per part plus the seed and config.
std::string split_manifest_json(const DatasetSplit& split);
void write_split_manifest(const DatasetSplit& split, const std::string& path);

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  SplitConfig config;
};

SplitManifest read_split_manifest(const std::string& path);

struct CorpusStats {
  std::size_t pair_count = 0;
  std::size_t example_count = 0;
  double label_balance = 0.0;  // fraction biased
  std::size_t duplicate_dropped = 0;
  std::size_t identical_pair_dropped = 0;
  double mean_token_length = 0.0;
  std::size_t max_token_length = 0;
};

CorpusStats corpus_stats(const std::vector<SentencePair>& pairs,
                         const DedupePolicy& policy = {});
CorpusStats corpus_stats(const std::vector<LabeledExample>& examples);

std::string corpus_stats_json(const CorpusStats& stats);

// Examples persist as JSONL (id, text, label, group), one per line.
void write_examples_jsonl(const std::vector<LabeledExample>& examples,
                          const std::string& path);
std::vector<LabeledExample> read_examples_jsonl(const std::string& path);

}  // namespace biasdet
