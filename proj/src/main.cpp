#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "biasdet/classifier.hpp"
#include "biasdet/corpus.hpp"
#include "biasdet/embedding.hpp"
#include "biasdet/ensemble.hpp"
#include "biasdet/errors.hpp"
#include "biasdet/evaluation.hpp"
#include "biasdet/predictions.hpp"
#include "biasdet/training.hpp"
#include "config_json.hpp"
#include "json.hpp"

namespace {

using namespace biasdet;

constexpr int kRunConfigVersion = 1;

void write_text_file(const std::filesystem::path& path,
                     const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out << data;
  if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": bad JSON: " + std::string(e.what()));
  }
}

// Stage config files share one envelope: format_version, family, and
// per-stage sections. Unknown keys are rejected.
struct RunConfig {
  std::string family;
  nlohmann::json model;  // family-specific model section
  nlohmann::json space;  // autotune search space section
  TrainConfig train;
  bool has_train = false;
};

RunConfig parse_run_config(const std::string& path,
                           const std::set<std::string>& allowed_sections) {
  nlohmann::json j = parse_json_file(path);
  RunConfig rc;
  try {
    if (!j.contains("format_version")) {
      throw FormatError(path + ": missing format_version");
    }
    int version = j.at("format_version").get<int>();
    if (version != kRunConfigVersion) {
      throw IncompatibilityError(path + ": config format version " +
                                 std::to_string(version) + " unsupported");
    }
    for (const auto& [key, value] : j.items()) {
      if (key == "format_version") continue;
      if (key == "family") {
        rc.family = value.get<std::string>();
      } else if (key == "model" && allowed_sections.count("model")) {
        rc.model = value;
      } else if (key == "space" && allowed_sections.count("space")) {
        rc.space = value;
      } else if (key == "train" && allowed_sections.count("train")) {
        rc.train = train_config_from_json_obj(value);
        rc.has_train = true;
      } else {
        throw ConfigError(path + ": unknown config key " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad field: " + std::string(e.what()));
  }
  return rc;
}

std::vector<LabeledExample> select_examples(
    const std::vector<LabeledExample>& all,
    const std::vector<std::string>& ids, const std::string& part) {
  std::map<std::string, const LabeledExample*> by_id;
  for (const auto& ex : all) by_id.emplace(ex.id, &ex);
  std::vector<LabeledExample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError("split part '" + part + "' references unknown example " +
                      id);
    }
    out.push_back(*it->second);
  }
  return out;
}

const std::vector<std::string>& manifest_part(const SplitManifest& manifest,
                                              const std::string& part) {
  if (part == "train") return manifest.train;
  if (part == "validation") return manifest.validation;
  if (part == "test") return manifest.test;
  throw ConfigError("unknown split part '" + part +
                    "' (expected train, validation, or test)");
}

TextDataset to_text_dataset(const std::vector<LabeledExample>& examples) {
  TextDataset ds;
  for (const auto& ex : examples) {
    ds.texts.push_back(ex.text);
    ds.labels.push_back(ex.label);
    ds.ids.push_back(ex.id);
  }
  return ds;
}

template <typename Model, typename Featurize>
Dataset<typename Model::Example> featurize_all(
    const std::vector<LabeledExample>& examples, Featurize&& featurize) {
  Dataset<typename Model::Example> ds;
  for (const auto& ex : examples) {
    ds.examples.push_back(featurize(ex.text));
    ds.labels.push_back(ex.label);
    ds.ids.push_back(ex.id);
  }
  return ds;
}

std::string final_metrics_line(const TrainReport& report) {
  const MetricsReport& m = report.epoch_val_metrics.back();
  return "validation P " + format_metric(m.precision) + "  R " +
         format_metric(m.recall) + "  F1 " + format_metric(m.f1) + "  Acc " +
         format_percent(m.accuracy);
}

// ---- prepare ----

struct PrepareOpts {
  std::string input;
  std::string out_dir;
  std::uint64_t seed = 0;
  double ratio = 0.9;
  double val_fraction = 0.1;
  std::string grouping = "pair";
  bool keep_identical = false;
  bool keep_duplicates = false;
};

int run_prepare(const PrepareOpts& opt) {
  ParsedPairs parsed = parse_pairs_tsv_file(opt.input);
  for (const auto& d : parsed.rejected) {
    std::cerr << "skipping line " << d.line << ": " << d.reason << "\n";
  }
  DedupePolicy policy;
  policy.drop_identical_pairs = !opt.keep_identical;
  policy.drop_duplicate_texts = !opt.keep_duplicates;
  ConversionStats conv;
  std::vector<LabeledExample> examples =
      pairs_to_examples(parsed.pairs, policy, &conv);

  SplitConfig sc;
  sc.ratio = opt.ratio;
  sc.val_fraction = opt.val_fraction;
  sc.seed = opt.seed;
  if (opt.grouping == "pair") {
    sc.grouping = SplitGrouping::kPair;
  } else if (opt.grouping == "sentence") {
    sc.grouping = SplitGrouping::kSentence;
  } else {
    throw ConfigError("unknown grouping '" + opt.grouping +
                      "' (expected pair or sentence)");
  }
  DatasetSplit split = split_dataset(examples, sc);

  std::filesystem::create_directories(opt.out_dir);
  std::filesystem::path dir(opt.out_dir);
  write_examples_jsonl(examples, (dir / "examples.jsonl").string());
  write_split_manifest(split, (dir / "split.json").string());

  CorpusStats stats = corpus_stats(parsed.pairs, policy);
  std::cout << corpus_stats_json(stats) << "\n";
  std::cout << "wrote " << examples.size() << " examples (" << split.train.size()
            << " train, " << split.validation.size() << " validation, "
            << split.test.size() << " test) to " << opt.out_dir << "\n";
  return 0;
}

// ---- stats ----

struct StatsOpts {
  std::string input;
  std::string examples;
};

int run_stats(const StatsOpts& opt) {
  if (opt.input.empty() == opt.examples.empty()) {
    throw ConfigError("stats: give exactly one of --input or --examples");
  }
  CorpusStats stats;
  if (!opt.input.empty()) {
    stats = corpus_stats(parse_pairs_tsv_file(opt.input).pairs);
  } else {
    stats = corpus_stats(read_examples_jsonl(opt.examples));
  }
  std::cout << corpus_stats_json(stats) << "\n";
  return 0;
}

// ---- train ----

struct TrainOpts {
  std::string config;
  std::string family;
  std::string examples;
  std::string split;
  std::string out_dir;
  std::string embeddings;
  std::uint64_t seed = 0;
  std::optional<double> learning_rate;
  std::optional<double> weight_decay;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> max_seq_len;
};

TrainConfig apply_train_flags(TrainConfig tc, const TrainOpts& opt) {
  if (opt.learning_rate) tc.learning_rate = *opt.learning_rate;
  if (opt.weight_decay) tc.weight_decay = *opt.weight_decay;
  if (opt.epochs) tc.epochs = *opt.epochs;
  if (opt.batch_size) tc.batch_size = *opt.batch_size;
  if (opt.max_seq_len) tc.max_seq_len = *opt.max_seq_len;
  tc.seed = opt.seed;
  return tc;
}

int run_train(const TrainOpts& opt) {
  RunConfig rc;
  if (!opt.config.empty()) rc = parse_run_config(opt.config, {"model", "train"});
  std::string family = !opt.family.empty() ? opt.family : rc.family;
  if (family.empty()) {
    throw ConfigError("train: no model family (give --family or a config)");
  }
  if (!opt.family.empty() && !rc.family.empty() && opt.family != rc.family) {
    throw ConfigError("train: --family " + opt.family +
                      " contradicts config family " + rc.family);
  }
  TrainConfig tc = apply_train_flags(rc.train, opt);

  std::vector<LabeledExample> all = read_examples_jsonl(opt.examples);
  SplitManifest manifest = read_split_manifest(opt.split);
  std::vector<LabeledExample> train_ex =
      select_examples(all, manifest.train, "train");
  std::vector<LabeledExample> val_ex =
      select_examples(all, manifest.validation, "validation");

  std::filesystem::path out_dir(opt.out_dir);
  std::unique_ptr<Classifier> classifier;
  TrainReport report;

  if (family == "ngram") {
    NGramLinearConfig cfg =
        rc.model.is_null() ? NGramLinearConfig{} : ngram_config_from_json(rc.model);
    NGramLinearModel<float> model(cfg, opt.seed);
    auto train_ds = featurize_all<NGramLinearModel<float>>(
        train_ex, [&](const std::string& t) { return model.featurize(t); });
    auto val_ds = featurize_all<NGramLinearModel<float>>(
        val_ex, [&](const std::string& t) { return model.featurize(t); });
    report = train_model(model, tc, train_ds, val_ds);
    classifier = std::make_unique<NGramClassifier>(std::move(model), opt.seed);
  } else if (family == "bilstm") {
    BiLstmConfig cfg =
        rc.model.is_null() ? BiLstmConfig{} : bilstm_config_from_json(rc.model);
    std::vector<std::string> texts;
    for (const auto& ex : train_ex) texts.push_back(ex.text);
    WordVocab vocab = WordVocab::build(texts);
    std::unique_ptr<BiLstmModel<float>> model;
    if (cfg.embedding_source == "file") {
      if (opt.embeddings.empty()) {
        throw ConfigError(
            "train: embedding_source is 'file' but --embeddings not given");
      }
      EmbeddingMatrix emb =
          load_embedding_file(opt.embeddings, vocab.tokens, cfg.embedding_dim,
                              derive_seed(opt.seed, 1));
      std::cerr << "embeddings: " << emb.found << " found, " << emb.missing
                << " filled randomly\n";
      model = std::make_unique<BiLstmModel<float>>(cfg, opt.seed, vocab.rows(),
                                                   &emb.rows);
    } else {
      if (!opt.embeddings.empty()) {
        throw ConfigError(
            "train: --embeddings given but embedding_source is not 'file'");
      }
      model = std::make_unique<BiLstmModel<float>>(cfg, opt.seed, vocab.rows());
    }
    auto max_len = static_cast<std::size_t>(tc.max_seq_len);
    auto featurize = [&](const std::string& t) {
      return BiLstmModel<float>::featurize(t, vocab, max_len);
    };
    auto train_ds = featurize_all<BiLstmModel<float>>(train_ex, featurize);
    auto val_ds = featurize_all<BiLstmModel<float>>(val_ex, featurize);
    report = train_model(*model, tc, train_ds, val_ds);
    classifier = std::make_unique<BiLstmClassifier>(
        std::move(*model), std::move(vocab), tc.max_seq_len, opt.seed);
  } else if (family == "transformer") {
    TransformerConfig cfg = rc.model.is_null()
                                ? transformer_preset("small")
                                : transformer_config_from_json(rc.model);
    std::vector<std::string> texts;
    for (const auto& ex : train_ex) texts.push_back(ex.text);
    // vocab_size in the config is the tokenizer's training target; the
    // embedding table is sized by what the corpus actually yields.
    std::size_t target = cfg.vocab_size > 0
                             ? static_cast<std::size_t>(cfg.vocab_size)
                             : std::size_t{4000};
    SubwordTokenizer tokenizer = SubwordTokenizer::train(texts, target);
    cfg.vocab_size = static_cast<int>(tokenizer.vocab_size());
    if (cfg.max_positions < tc.max_seq_len) {
      throw ConfigError("train: max_seq_len exceeds the model's max_positions");
    }
    TransformerModel<float> model(cfg, opt.seed);
    auto max_len = static_cast<std::size_t>(tc.max_seq_len);
    auto featurize = [&](const std::string& t) {
      return TransformerModel<float>::featurize(t, tokenizer, max_len);
    };
    auto train_ds = featurize_all<TransformerModel<float>>(train_ex, featurize);
    auto val_ds = featurize_all<TransformerModel<float>>(val_ex, featurize);
    report = train_model(model, tc, train_ds, val_ds);
    classifier = std::make_unique<TransformerClassifier>(
        std::move(model), std::move(tokenizer), tc.max_seq_len, opt.seed);
  } else {
    throw ConfigError("train: unknown family " + family);
  }

  classifier->save(out_dir);
  write_text_file(out_dir / "train_report.json", report.to_json() + "\n");
  std::cout << "trained " << family << " (" << classifier->param_count()
            << " parameters), " << final_metrics_line(report) << "\n";
  std::cout << "bundle written to " << opt.out_dir << "\n";
  return 0;
}

// ---- autotune ----

struct AutotuneOpts {
  std::string config;
  std::string examples;
  std::string split;
  std::string out_dir;
  std::uint64_t seed = 0;
};

int run_autotune(const AutotuneOpts& opt) {
  RunConfig rc = parse_run_config(opt.config, {"space", "train"});
  if (!rc.family.empty() && rc.family != "ngram") {
    throw ConfigError("autotune: only the ngram family is supported");
  }
  if (rc.space.is_null()) {
    throw ConfigError(opt.config + ": missing space section");
  }
  AutotuneSpace space = autotune_space_from_json(rc.space);

  std::vector<LabeledExample> all = read_examples_jsonl(opt.examples);
  SplitManifest manifest = read_split_manifest(opt.split);
  TextDataset train_ds =
      to_text_dataset(select_examples(all, manifest.train, "train"));
  TextDataset val_ds =
      to_text_dataset(select_examples(all, manifest.validation, "validation"));

  AutotuneResult result =
      autotune_ngram(space, rc.train, train_ds, val_ds, opt.seed);

  std::filesystem::path out_dir(opt.out_dir);
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "trials.jsonl",
                  autotune_trials_jsonl(result.trials));
  nlohmann::json best{{"format_version", kRunConfigVersion},
                      {"family", "ngram"},
                      {"model", ngram_config_to_json(result.best_model_config)},
                      {"train", train_config_to_json(result.best_train_config)}};
  write_text_file(out_dir / "best_config.json", best.dump(2) + "\n");
  NGramClassifier(std::move(result.best_model),
                  result.best_train_config.seed)
      .save(out_dir / "best_bundle");

  std::cout << "best trial " << result.best_trial << ": " << space.objective
            << " " << format_metric(result.best_objective) << "\n";
  std::cout << "artifacts written to " << opt.out_dir << "\n";
  return 0;
}

// ---- predict ----

struct PredictOpts {
  std::string bundle;
  std::string examples;
  std::string split;
  std::string part = "test";
  std::string out;
  std::string model_name;
  int batch_size = 32;
};

int run_predict(const PredictOpts& opt) {
  std::unique_ptr<Classifier> classifier = Classifier::load(opt.bundle);
  std::vector<LabeledExample> examples = read_examples_jsonl(opt.examples);
  if (!opt.split.empty()) {
    SplitManifest manifest = read_split_manifest(opt.split);
    examples =
        select_examples(examples, manifest_part(manifest, opt.part), opt.part);
  }
  std::vector<std::string> texts;
  for (const auto& ex : examples) texts.push_back(ex.text);
  auto probs = classifier->predict_texts(texts, opt.batch_size);

  std::string name =
      !opt.model_name.empty() ? opt.model_name : classifier->family();
  std::vector<PredictionRecord> records;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    PredictionRecord r;
    r.example_id = examples[i].id;
    r.model = name;
    r.p_neutral = probs[i][0];
    r.p_biased = probs[i][1];
    r.gold = examples[i].label;
    records.push_back(std::move(r));
  }
  write_predictions_file(records, opt.out);
  std::cout << "wrote " << records.size() << " predictions to " << opt.out
            << "\n";
  return 0;
}

// ---- ensemble-fit / ensemble-eval ----

JoinedPredictions read_and_join(const std::vector<std::string>& pred_files) {
  std::vector<std::vector<PredictionRecord>> per_model;
  for (const auto& path : pred_files) {
    per_model.push_back(read_predictions_file(path));
  }
  return join_predictions(per_model);
}

struct EnsembleFitOpts {
  std::vector<std::string> preds;
  std::string out;
  std::string objective = "f1";
  double grid_resolution = 0.05;
  double threshold = 0.5;
};

int run_ensemble_fit(const EnsembleFitOpts& opt) {
  JoinedPredictions joined = read_and_join(opt.preds);
  if (!joined.has_gold) {
    throw DataError("ensemble-fit: prediction files lack gold labels");
  }
  FitResult fit = fit_weights(joined.matrix, joined.gold, opt.objective,
                              opt.grid_resolution, opt.threshold);
  EnsembleSpec spec;
  spec.members = joined.matrix.model_names;
  spec.weights = fit.weights;
  spec.objective = opt.objective;
  spec.grid_resolution = opt.grid_resolution;
  spec.threshold = opt.threshold;
  spec.validate();
  write_text_file(opt.out, spec.to_json() + "\n");

  std::cout << "fitted weights:";
  for (std::size_t m = 0; m < spec.members.size(); ++m) {
    std::cout << " " << spec.members[m] << "=" << spec.weights[m];
  }
  std::cout << "\nvalidation " << opt.objective << " "
            << format_metric(fit.objective_value) << "\n";
  std::cout << "spec written to " << opt.out << "\n";
  return 0;
}

struct EnsembleEvalOpts {
  std::string spec;
  std::vector<std::string> preds;
  std::string out;
  std::string preds_out;
  std::string model_name = "ensemble";
};

int run_ensemble_eval(const EnsembleEvalOpts& opt) {
  std::ifstream spec_in(opt.spec);
  if (!spec_in) throw IoError("cannot open: " + opt.spec);
  std::string spec_text((std::istreambuf_iterator<char>(spec_in)),
                        std::istreambuf_iterator<char>());
  EnsembleSpec spec = EnsembleSpec::from_json(spec_text);

  JoinedPredictions joined = read_and_join(opt.preds);
  if (joined.matrix.models() != spec.members.size()) {
    throw DataError("ensemble-eval: spec lists " +
                    std::to_string(spec.members.size()) + " members but " +
                    std::to_string(joined.matrix.models()) +
                    " prediction files were given");
  }
  std::vector<double> weights(joined.matrix.models(), 0.0);
  for (std::size_t m = 0; m < joined.matrix.models(); ++m) {
    const std::string& name = joined.matrix.model_names[m];
    auto it = std::find(spec.members.begin(), spec.members.end(), name);
    if (it == spec.members.end()) {
      throw DataError("ensemble-eval: model " + name + " is not in the spec");
    }
    weights[m] =
        spec.weights[static_cast<std::size_t>(it - spec.members.begin())];
  }

  auto combined = combine(joined.matrix, weights);
  if (!opt.preds_out.empty()) {
    std::vector<PredictionRecord> records;
    for (std::size_t n = 0; n < combined.size(); ++n) {
      PredictionRecord r;
      r.example_id = joined.matrix.example_ids[n];
      r.model = opt.model_name;
      r.p_neutral = combined[n][0];
      r.p_biased = combined[n][1];
      if (joined.has_gold) r.gold = joined.gold[n];
      records.push_back(std::move(r));
    }
    write_predictions_file(records, opt.preds_out);
  }
  if (!joined.has_gold) {
    throw DataError("ensemble-eval: prediction files lack gold labels");
  }
  std::vector<int> labels = decide(combined, spec.threshold);
  MetricsReport metrics = compute_metrics(
      compute_confusion(labels, joined.gold), opt.model_name);
  write_text_file(opt.out, metrics_report_json(metrics) + "\n");
  std::cout << render_report_text({metrics});
  return 0;
}

// ---- evaluate / report ----

struct EvaluateOpts {
  std::string preds;
  std::string out;
  std::string model_name;
  double threshold = 0.5;
};

int run_evaluate(const EvaluateOpts& opt) {
  std::vector<PredictionRecord> records = read_predictions_file(opt.preds);
  if (records.empty()) throw DataError("evaluate: no predictions in " + opt.preds);
  std::vector<std::array<double, 2>> probs;
  std::vector<int> gold;
  std::string name = opt.model_name;
  for (const auto& r : records) {
    if (!r.gold.has_value()) {
      throw DataError("evaluate: prediction " + r.example_id +
                      " lacks a gold label");
    }
    probs.push_back({r.p_neutral, r.p_biased});
    gold.push_back(*r.gold);
    if (name.empty()) {
      name = r.model;
    } else if (opt.model_name.empty() && r.model != name) {
      throw DataError("evaluate: mixed model names; give --model-name");
    }
  }
  if (opt.threshold <= 0.0 || opt.threshold >= 1.0) {
    throw ConfigError("evaluate: threshold must be in (0, 1)");
  }
  MetricsReport metrics =
      compute_metrics(compute_confusion(decide(probs, opt.threshold), gold),
                      name);
  write_text_file(opt.out, metrics_report_json(metrics) + "\n");
  std::cout << render_report_text({metrics});
  return 0;
}

struct ReportOpts {
  std::vector<std::string> reports;
  std::string format = "text";
  std::string out;
};

int run_report(const ReportOpts& opt) {
  std::vector<MetricsReport> reports;
  for (const auto& path : opt.reports) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    reports.push_back(metrics_report_from_json(text));
  }
  std::string rendered;
  if (opt.format == "text") {
    rendered = render_report_text(reports);
  } else if (opt.format == "csv") {
    rendered = render_report_csv(reports);
  } else {
    throw ConfigError("report: unknown format '" + opt.format +
                      "' (expected text or csv)");
  }
  if (!opt.out.empty()) write_text_file(opt.out, rendered);
  std::cout << rendered;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentence-level subjective bias classification pipeline"};
  app.require_subcommand(1);

  PrepareOpts prepare_opts;
  CLI::App* prepare = app.add_subcommand(
      "prepare", "Convert a revision-pair TSV into labeled examples and splits");
  prepare->add_option("--input", prepare_opts.input, "Pairs TSV")->required();
  prepare->add_option("--out-dir", prepare_opts.out_dir, "Output directory")
      ->required();
  prepare->add_option("--seed", prepare_opts.seed, "Split shuffle seed")
      ->required();
  prepare->add_option("--ratio", prepare_opts.ratio, "Train fraction");
  prepare->add_option("--val-fraction", prepare_opts.val_fraction,
                      "Validation fraction carved from train");
  prepare->add_option("--grouping", prepare_opts.grouping,
                      "Split unit: pair or sentence");
  prepare->add_flag("--keep-identical-pairs", prepare_opts.keep_identical,
                    "Keep pairs whose sides match after normalization");
  prepare->add_flag("--keep-duplicate-texts", prepare_opts.keep_duplicates,
                    "Keep repeated (text, label) examples");

  StatsOpts stats_opts;
  CLI::App* stats = app.add_subcommand("stats", "Corpus summary statistics");
  stats->add_option("--input", stats_opts.input, "Pairs TSV");
  stats->add_option("--examples", stats_opts.examples, "Examples JSONL");

  TrainOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "Train one classifier family");
  train->add_option("--config", train_opts.config, "Run config JSON");
  train->add_option("--family", train_opts.family,
                    "ngram, bilstm, or transformer");
  train->add_option("--examples", train_opts.examples, "Examples JSONL")
      ->required();
  train->add_option("--split", train_opts.split, "Split manifest")->required();
  train->add_option("--out-dir", train_opts.out_dir, "Bundle directory")
      ->required();
  train->add_option("--seed", train_opts.seed, "Init and shuffle seed")
      ->required();
  train->add_option("--embeddings", train_opts.embeddings,
                    "Pretrained word-vector file (bilstm)");
  train->add_option("--learning-rate", train_opts.learning_rate,
                    "Override: peak learning rate");
  train->add_option("--weight-decay", train_opts.weight_decay,
                    "Override: decoupled weight decay");
  train->add_option("--epochs", train_opts.epochs, "Override: epochs");
  train->add_option("--batch-size", train_opts.batch_size,
                    "Override: batch size");
  train->add_option("--max-seq-len", train_opts.max_seq_len,
                    "Override: maximum sequence length");

  AutotuneOpts autotune_opts;
  CLI::App* autotune = app.add_subcommand(
      "autotune", "Random-search hyperparameters for the ngram family");
  autotune->add_option("--config", autotune_opts.config, "Run config JSON")
      ->required();
  autotune->add_option("--examples", autotune_opts.examples, "Examples JSONL")
      ->required();
  autotune->add_option("--split", autotune_opts.split, "Split manifest")
      ->required();
  autotune->add_option("--out-dir", autotune_opts.out_dir, "Output directory")
      ->required();
  autotune->add_option("--seed", autotune_opts.seed, "Search seed")->required();

  PredictOpts predict_opts;
  CLI::App* predict =
      app.add_subcommand("predict", "Run a saved bundle over examples");
  predict->add_option("--bundle", predict_opts.bundle, "Bundle directory")
      ->required();
  predict->add_option("--examples", predict_opts.examples, "Examples JSONL")
      ->required();
  predict->add_option("--split", predict_opts.split, "Split manifest");
  predict->add_option("--part", predict_opts.part,
                      "Split part (train, validation, test)");
  predict->add_option("--out", predict_opts.out, "Prediction JSONL")
      ->required();
  predict->add_option("--model-name", predict_opts.model_name,
                      "Name stamped on records (default: family)");
  predict->add_option("--batch-size", predict_opts.batch_size,
                      "Inference batch size");

  EnsembleFitOpts fit_opts;
  CLI::App* ensemble_fit = app.add_subcommand(
      "ensemble-fit", "Fit soft-voting weights on validation predictions");
  ensemble_fit
      ->add_option("--preds", fit_opts.preds, "Prediction JSONL (repeatable)")
      ->required();
  ensemble_fit->add_option("--out", fit_opts.out, "Ensemble spec JSON")
      ->required();
  ensemble_fit->add_option("--objective", fit_opts.objective,
                           "f1 or accuracy");
  ensemble_fit->add_option("--grid-resolution", fit_opts.grid_resolution,
                           "Weight grid step");
  ensemble_fit->add_option("--threshold", fit_opts.threshold,
                           "Decision threshold");

  EnsembleEvalOpts eval_ens_opts;
  CLI::App* ensemble_eval = app.add_subcommand(
      "ensemble-eval", "Evaluate a fitted ensemble on predictions");
  ensemble_eval->add_option("--spec", eval_ens_opts.spec, "Ensemble spec JSON")
      ->required();
  ensemble_eval
      ->add_option("--preds", eval_ens_opts.preds,
                   "Prediction JSONL (repeatable)")
      ->required();
  ensemble_eval->add_option("--out", eval_ens_opts.out, "Metrics report JSON")
      ->required();
  ensemble_eval->add_option("--preds-out", eval_ens_opts.preds_out,
                            "Combined prediction JSONL");
  ensemble_eval->add_option("--model-name", eval_ens_opts.model_name,
                            "Name for the combined row");

  EvaluateOpts evaluate_opts;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Score predictions against gold labels");
  evaluate->add_option("--preds", evaluate_opts.preds, "Prediction JSONL")
      ->required();
  evaluate->add_option("--out", evaluate_opts.out, "Metrics report JSON")
      ->required();
  evaluate->add_option("--model-name", evaluate_opts.model_name,
                       "Row name override");
  evaluate->add_option("--threshold", evaluate_opts.threshold,
                       "Decision threshold");

  ReportOpts report_opts;
  CLI::App* report =
      app.add_subcommand("report", "Render metric reports as a table");
  report
      ->add_option("--reports", report_opts.reports,
                   "Metrics report JSON (repeatable)")
      ->required();
  report->add_option("--format", report_opts.format, "text or csv");
  report->add_option("--out", report_opts.out, "Also write the table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(prepare)) return run_prepare(prepare_opts);
    if (app.got_subcommand(stats)) return run_stats(stats_opts);
    if (app.got_subcommand(train)) return run_train(train_opts);
    if (app.got_subcommand(autotune)) return run_autotune(autotune_opts);
    if (app.got_subcommand(predict)) return run_predict(predict_opts);
    if (app.got_subcommand(ensemble_fit)) return run_ensemble_fit(fit_opts);
    if (app.got_subcommand(ensemble_eval))
      return run_ensemble_eval(eval_ens_opts);
    if (app.got_subcommand(evaluate)) return run_evaluate(evaluate_opts);
    if (app.got_subcommand(report)) return run_report(report_opts);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << " (step " << e.step
              << ", lr " << e.lr << ", batch [" << e.batch_ids << "])\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
