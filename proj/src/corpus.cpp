#include "biasdet/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "biasdet/errors.hpp"
#include "biasdet/rng.hpp"
#include "biasdet/tokenize.hpp"
#include "biasdet/unicode.hpp"

namespace biasdet {

namespace {

using nlohmann::json;

bool all_whitespace(std::string_view s) {
  for (char32_t cp : uni::decode_utf8(s)) {
    if (!uni::is_whitespace(cp)) return false;
  }
  return true;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

}  // namespace

ParsedPairs parse_pairs_tsv(std::istream& in) {
  if (!in.good()) throw IoError("pairs TSV: stream is not readable");

  ParsedPairs out;
  std::string line;
  std::size_t line_no = 0;
  bool any_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    any_content = true;

    const auto fields = split_tabs(line);
    if (fields.size() < 3) {
      out.rejected.push_back(
          {line_no, "expected at least 3 tab-separated fields, got " +
                        std::to_string(fields.size())});
      continue;
    }
    if (fields[0].empty()) {
      out.rejected.push_back({line_no, "empty revision id"});
      continue;
    }
    if (all_whitespace(fields[1]) || all_whitespace(fields[2])) {
      out.rejected.push_back({line_no, "empty sentence field"});
      continue;
    }
    out.pairs.push_back({std::string(fields[0]), std::string(fields[1]),
                         std::string(fields[2])});
  }
  if (in.bad()) throw IoError("pairs TSV: read failure");
  if (any_content && out.pairs.empty()) {
    throw FormatError("pairs TSV: no well-formed lines in non-empty input (" +
                      std::to_string(out.rejected.size()) + " rejected)");
  }
  return out;
}

ParsedPairs parse_pairs_tsv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return parse_pairs_tsv(in);
}

std::vector<LabeledExample> pairs_to_examples(
    const std::vector<SentencePair>& pairs, const DedupePolicy& policy,
    ConversionStats* stats) {
  ConversionStats local;
  std::vector<LabeledExample> out;
  out.reserve(pairs.size() * 2);
  std::unordered_set<std::string> seen;  // normalized text + label
  std::unordered_map<std::string, int> id_uses;

  auto push = [&](const SentencePair& p, bool biased,
                  const std::string& normalized) {
    if (policy.drop_duplicate_texts) {
      std::string key = (biased ? "1\t" : "0\t") + normalized;
      if (!seen.insert(std::move(key)).second) {
        ++local.duplicate_dropped;
        return;
      }
    }
    std::string id = p.revision_id + (biased ? ":pre" : ":post");
    const int uses = ++id_uses[id];
    if (uses > 1) id += "#" + std::to_string(uses);  // repeated revision id
    out.push_back({std::move(id), biased ? p.pre : p.post, biased ? 1 : 0,
                   p.revision_id});
  };

  for (const SentencePair& p : pairs) {
    const std::string pre_norm = uni::nfc_collapse_ws(p.pre);
    const std::string post_norm = uni::nfc_collapse_ws(p.post);
    if (policy.drop_identical_pairs && pre_norm == post_norm) {
      ++local.identical_pair_dropped;
      continue;
    }
    push(p, true, pre_norm);
    push(p, false, post_norm);
  }
  if (stats) *stats = local;
  return out;
}

DatasetSplit split_dataset(const std::vector<LabeledExample>& examples,
                           const SplitConfig& config) {
  if (!(config.ratio > 0.0 && config.ratio < 1.0)) {
    throw ConfigError("split: ratio must be in (0,1)");
  }
  if (!(config.val_fraction >= 0.0 && config.val_fraction < 1.0)) {
    throw ConfigError("split: val_fraction must be in [0,1)");
  }
  if (examples.empty()) throw ConfigError("split: no examples");

  // Units are either single examples or whole revision groups. Sorting unit
  // keys first makes membership independent of input order.
  std::map<std::string, std::vector<std::size_t>> units;
  if (config.grouping == SplitGrouping::kPair) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      units[examples[i].group].push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      units[examples[i].id].push_back(i);
    }
  }
  std::vector<const std::vector<std::size_t>*> order;
  order.reserve(units.size());
  for (const auto& [key, members] : units) order.push_back(&members);

  Rng rng(config.seed);
  rng.shuffle(order);

  const std::size_t unit_count = order.size();
  const auto test_units = static_cast<std::size_t>(
      std::llround((1.0 - config.ratio) * static_cast<double>(unit_count)));
  const std::size_t pool_units = unit_count - test_units;
  const auto val_units = static_cast<std::size_t>(
      std::llround(config.val_fraction * static_cast<double>(pool_units)));

  DatasetSplit split;
  split.config = config;
  auto emit = [&](std::size_t begin, std::size_t end,
                  std::vector<LabeledExample>& dst) {
    for (std::size_t u = begin; u < end; ++u) {
      for (std::size_t i : *order[u]) dst.push_back(examples[i]);
    }
  };
  emit(0, test_units, split.test);
  emit(test_units, test_units + val_units, split.validation);
  emit(test_units + val_units, unit_count, split.train);

  if (split.test.empty()) {
    throw ConfigError("split: test part is empty at ratio " +
                      std::to_string(config.ratio));
  }
  if (split.train.empty()) throw ConfigError("split: train part is empty");
  if (config.val_fraction > 0.0 && split.validation.empty()) {
    throw ConfigError("split: validation part is empty at val_fraction " +
                      std::to_string(config.val_fraction));
  }
  return split;
}

namespace {

json split_config_json(const SplitConfig& config) {
  return json{
      {"ratio", config.ratio},
      {"val_fraction", config.val_fraction},
      {"seed", config.seed},
      {"grouping",
       config.grouping == SplitGrouping::kPair ? "pair" : "sentence"}};
}

std::vector<std::string> ids_of(const std::vector<LabeledExample>& v) {
  std::vector<std::string> ids;
  ids.reserve(v.size());
  for (const auto& e : v) ids.push_back(e.id);
  return ids;
}

}  // namespace

std::string split_manifest_json(const DatasetSplit& split) {
  json j{{"format_version", 1},
         {"config", split_config_json(split.config)},
         {"counts",
          {{"train", split.train.size()},
           {"validation", split.validation.size()},
           {"test", split.test.size()}}},
         {"train", ids_of(split.train)},
         {"validation", ids_of(split.validation)},
         {"test", ids_of(split.test)}};
  return j.dump(2) + "\n";
}

void write_split_manifest(const DatasetSplit& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << split_manifest_json(split);
  if (!out) throw IoError("write failed: " + path);
}

SplitManifest read_split_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("split manifest " + path + ": " + e.what());
  }
  try {
    SplitManifest m;
    if (j.at("format_version").get<int>() != 1) {
      throw IncompatibilityError("split manifest " + path +
                                 ": unsupported format_version");
    }
    const json& cfg = j.at("config");
    m.config.ratio = cfg.at("ratio").get<double>();
    m.config.val_fraction = cfg.at("val_fraction").get<double>();
    m.config.seed = cfg.at("seed").get<std::uint64_t>();
    const std::string grouping = cfg.at("grouping").get<std::string>();
    if (grouping == "pair") {
      m.config.grouping = SplitGrouping::kPair;
    } else if (grouping == "sentence") {
      m.config.grouping = SplitGrouping::kSentence;
    } else {
      throw FormatError("split manifest " + path + ": unknown grouping '" +
                        grouping + "'");
    }
    m.train = j.at("train").get<std::vector<std::string>>();
    m.validation = j.at("validation").get<std::vector<std::string>>();
    m.test = j.at("test").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError("split manifest " + path + ": " + e.what());
  }
}

namespace {

void token_stats(const std::vector<LabeledExample>& examples,
                 CorpusStats& stats) {
  std::size_t total = 0;
  for (const auto& e : examples) {
    const std::size_t len = normalize_and_tokenize(e.text).size();
    total += len;
    stats.max_token_length = std::max(stats.max_token_length, len);
  }
  stats.mean_token_length =
      examples.empty()
          ? 0.0
          : static_cast<double>(total) / static_cast<double>(examples.size());
}

void label_stats(const std::vector<LabeledExample>& examples,
                 CorpusStats& stats) {
  std::size_t biased = 0;
  for (const auto& e : examples) biased += e.label == 1 ? 1 : 0;
  stats.example_count = examples.size();
  stats.label_balance =
      examples.empty() ? 0.0
                       : static_cast<double>(biased) /
                             static_cast<double>(examples.size());
}

}  // namespace

CorpusStats corpus_stats(const std::vector<SentencePair>& pairs,
                         const DedupePolicy& policy) {
  CorpusStats stats;
  stats.pair_count = pairs.size();
  ConversionStats conv;
  const auto examples = pairs_to_examples(pairs, policy, &conv);
  stats.duplicate_dropped = conv.duplicate_dropped;
  stats.identical_pair_dropped = conv.identical_pair_dropped;
  label_stats(examples, stats);
  token_stats(examples, stats);
  return stats;
}

CorpusStats corpus_stats(const std::vector<LabeledExample>& examples) {
  CorpusStats stats;
  std::unordered_set<std::string> groups;
  for (const auto& e : examples) groups.insert(e.group);
  stats.pair_count = groups.size();
  label_stats(examples, stats);
  token_stats(examples, stats);
  return stats;
}

std::string corpus_stats_json(const CorpusStats& stats) {
  json j{{"pair_count", stats.pair_count},
         {"example_count", stats.example_count},
         {"label_balance", stats.label_balance},
         {"duplicate_dropped", stats.duplicate_dropped},
         {"identical_pair_dropped", stats.identical_pair_dropped},
         {"mean_token_length", stats.mean_token_length},
         {"max_token_length", stats.max_token_length}};
  return j.dump(2) + "\n";
}

void write_examples_jsonl(const std::vector<LabeledExample>& examples,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& e : examples) {
    json j{{"id", e.id}, {"text", e.text}, {"label", e.label},
           {"group", e.group}};
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<LabeledExample> read_examples_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      LabeledExample e;
      e.id = j.at("id").get<std::string>();
      e.text = j.at("text").get<std::string>();
      e.label = j.at("label").get<int>();
      e.group = j.at("group").get<std::string>();
      if (e.label != 0 && e.label != 1) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": label must be 0 or 1");
      }
      out.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return out;
}

}  // namespace biasdet
