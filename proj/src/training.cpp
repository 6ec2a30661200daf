#include "biasdet/training.hpp"

#include <cmath>
#include <limits>

#include "biasdet/ensemble.hpp"
#include "config_json.hpp"
#include "json.hpp"

namespace biasdet {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train config: learning_rate must be positive");
  }
  if (weight_decay < 0.0 || !std::isfinite(weight_decay)) {
    throw ConfigError("train config: weight_decay must be >= 0");
  }
  if (max_seq_len < 1) {
    throw ConfigError("train config: max_seq_len must be >= 1");
  }
  if (batch_size < 1) {
    throw ConfigError("train config: batch_size must be >= 1");
  }
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) {
    throw ConfigError("train config: warmup_fraction must be in [0,1]");
  }
  if (clip_norm < 0.0) {
    throw ConfigError("train config: clip_norm must be >= 0");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("train config: betas must be in [0,1)");
  }
  if (!(adam_eps > 0.0)) {
    throw ConfigError("train config: adam_eps must be positive");
  }
}

double schedule_lr(long step, long total_steps, double peak,
                   double warmup_fraction) {
  if (total_steps < 1) throw ContractError("schedule: total_steps must be >= 1");
  if (step < 0 || step >= total_steps) {
    throw ContractError("schedule: step out of range");
  }
  long warmup = std::llround(warmup_fraction * static_cast<double>(total_steps));
  if (warmup > total_steps - 1) warmup = total_steps - 1;
  if (step < warmup) {
    return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  long decay_span = total_steps - 1 - warmup;
  if (decay_span == 0) return 0.0;
  return peak * static_cast<double>(total_steps - 1 - step) /
         static_cast<double>(decay_span);
}

namespace {

char hex_digit(unsigned v) { return "0123456789abcdef"[v & 0xf]; }

std::string hex64(std::uint64_t v) {
  std::string s = "0x";
  for (int shift = 60; shift >= 0; shift -= 4) {
    s += hex_digit(static_cast<unsigned>(v >> shift));
  }
  return s;
}

}  // namespace

std::string train_config_json(const TrainConfig& cfg) {
  return train_config_to_json(cfg).dump(2) + "\n";
}

TrainConfig train_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("train config: bad JSON: ") + e.what());
  }
  return train_config_from_json_obj(j);
}

std::string TrainReport::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["epoch_losses"] = epoch_losses;
  nlohmann::json vals = nlohmann::json::array();
  for (const auto& m : epoch_val_metrics) {
    vals.push_back(nlohmann::json::parse(metrics_report_json(m)));
  }
  j["val_metrics"] = vals;
  j["wall_seconds"] = wall_seconds;
  j["config"] = train_config_to_json(config);
  j["param_checksum"] = hex64(param_checksum);
  j["deterministic"] = deterministic;
  return j.dump(2) + "\n";
}

namespace detail {

MetricsReport validation_metrics(const std::vector<std::array<double, 2>>& probs,
                                 const std::vector<std::int32_t>& gold,
                                 const std::string& model_name) {
  std::vector<int> predicted = decide(probs, 0.5);
  std::vector<int> gold_int(gold.begin(), gold.end());
  return compute_metrics(compute_confusion(predicted, gold_int), model_name);
}

}  // namespace detail

void AutotuneSpace::validate() const {
  if (budget < 1) throw ConfigError("autotune: budget must be >= 1");
  if (learning_rates.empty() || epochs.empty() || n_max.empty() ||
      buckets.empty() || dims.empty()) {
    throw ConfigError("autotune: every candidate list must be non-empty");
  }
  if (objective != "f1" && objective != "accuracy") {
    throw ConfigError("autotune: objective must be f1 or accuracy");
  }
}

namespace {

Dataset<NGramLinearModel<float>::Example> featurize_texts(
    const NGramLinearModel<float>& model, const TextDataset& ds) {
  Dataset<NGramLinearModel<float>::Example> out;
  out.examples.reserve(ds.size());
  for (const auto& text : ds.texts) out.examples.push_back(model.featurize(text));
  out.labels = ds.labels;
  out.ids = ds.ids;
  return out;
}

}  // namespace

AutotuneResult autotune_ngram(const AutotuneSpace& space,
                              const TrainConfig& base, const TextDataset& train,
                              const TextDataset& val, std::uint64_t seed) {
  space.validate();
  if (train.size() == 0) throw ConfigError("autotune: empty training set");
  if (val.size() == 0) throw ConfigError("autotune: empty validation set");

  AutotuneResult result;
  result.best_objective = -std::numeric_limits<double>::infinity();
  bool have_best = false;
  NGramLinearModel<float> best_model(NGramLinearConfig{2, 1, 1}, 0);

  for (int trial = 0; trial < space.budget; ++trial) {
    Rng pick(derive_seed(seed, 2 * static_cast<std::uint64_t>(trial)));
    NGramLinearConfig mc;
    mc.n_max = space.n_max[pick.uniform_below(space.n_max.size())];
    mc.buckets = space.buckets[pick.uniform_below(space.buckets.size())];
    mc.dim = space.dims[pick.uniform_below(space.dims.size())];
    TrainConfig tc = base;
    tc.learning_rate =
        space.learning_rates[pick.uniform_below(space.learning_rates.size())];
    tc.epochs = space.epochs[pick.uniform_below(space.epochs.size())];
    tc.seed = derive_seed(seed, 2 * static_cast<std::uint64_t>(trial) + 1);

    AutotuneTrial log;
    log.index = trial;
    log.model_config = mc;
    log.train_config = tc;
    try {
      NGramLinearModel<float> model(mc, tc.seed);
      auto train_ds = featurize_texts(model, train);
      auto val_ds = featurize_texts(model, val);
      TrainReport report = train_model(model, tc, train_ds, val_ds);
      const MetricsReport& final_val = report.epoch_val_metrics.back();
      log.ok = true;
      log.objective =
          space.objective == "f1" ? final_val.f1 : final_val.accuracy;
      if (!have_best || log.objective > result.best_objective) {
        have_best = true;
        result.best_objective = log.objective;
        result.best_trial = trial;
        result.best_model_config = mc;
        result.best_train_config = tc;
        best_model = std::move(model);
      }
    } catch (const ConfigError& e) {
      log.error = e.what();
    } catch (const NumericError& e) {
      log.error = e.what();
    }
    result.trials.push_back(std::move(log));
  }

  if (!have_best) {
    throw ConfigError("autotune: every trial failed");
  }
  result.best_model = std::move(best_model);
  return result;
}

std::string autotune_trials_jsonl(const std::vector<AutotuneTrial>& trials) {
  std::string out;
  for (const AutotuneTrial& t : trials) {
    nlohmann::json j;
    j["trial"] = t.index;
    j["config"] = {{"n_max", t.model_config.n_max},
                   {"buckets", t.model_config.buckets},
                   {"dim", t.model_config.dim},
                   {"learning_rate", t.train_config.learning_rate},
                   {"epochs", t.train_config.epochs},
                   {"seed", t.train_config.seed}};
    if (t.ok) {
      j["objective"] = t.objective;
    } else {
      j["objective"] = nullptr;
      j["error"] = t.error;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace biasdet
