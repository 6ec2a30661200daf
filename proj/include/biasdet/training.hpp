#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "biasdet/errors.hpp"
#include "biasdet/evaluation.hpp"
#include "biasdet/models.hpp"
#include "biasdet/rng.hpp"

namespace biasdet {

struct TrainConfig {
  double learning_rate = 2e-5;
  double weight_decay = 0.01;
  int max_seq_len = 50;
  int batch_size = 32;
  int epochs = 3;
  double warmup_fraction = 0.1;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

// Piecewise-linear rate: rises to the peak over W = round(warmup * total)
// steps (value peak * (t+1)/W), then falls linearly to exactly 0 at the
// final step (value peak * (total-1-t) / (total-1-W)).
double schedule_lr(long step, long total_steps, double peak,
                   double warmup_fraction);

struct TrainReport {
  std::vector<double> epoch_losses;
  std::vector<MetricsReport> epoch_val_metrics;
  double wall_seconds = 0.0;
  TrainConfig config;
  std::uint64_t param_checksum = 0;
  bool deterministic = true;

  std::string to_json() const;
};

std::string train_config_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

// Deterministic inference over a dataset in order, fixed batch size.
template <typename Model>
std::vector<std::array<double, 2>> predict_dataset(
    const Model& model, const Dataset<typename Model::Example>& ds,
    int batch_size) {
  if (batch_size < 1) throw ConfigError("predict: batch size must be >= 1");
  std::vector<std::array<double, 2>> out;
  out.reserve(ds.size());
  for (std::size_t at = 0; at < ds.size(); at += batch_size) {
    std::size_t hi = std::min(ds.size(), at + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idxs(hi - at);
    std::iota(idxs.begin(), idxs.end(), at);
    auto probs = model.predict_proba(model.make_batch(ds, idxs));
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      out.push_back({static_cast<double>(probs(r, 0)),
                     static_cast<double>(probs(r, 1))});
    }
  }
  return out;
}

namespace detail {

MetricsReport validation_metrics(const std::vector<std::array<double, 2>>& probs,
                                 const std::vector<std::int32_t>& gold,
                                 const std::string& model_name);

}  // namespace detail

// AdamW loop: per-epoch seeded shuffle, warmup/decay schedule, global-norm
// gradient clipping, decoupled weight decay applied to the pre-step value.
// Single-threaded; identical (inputs, config, seed) give bitwise-identical
// parameters.
template <typename Model>
TrainReport train_model(Model& model, const TrainConfig& cfg,
                        const Dataset<typename Model::Example>& train,
                        const Dataset<typename Model::Example>& val) {
  using Scalar = typename Model::ScalarType;
  using Mat = typename Tape<Scalar>::Mat;
  cfg.validate();
  if (train.size() == 0) throw ConfigError("train: empty training set");
  if (val.size() == 0) throw ConfigError("train: empty validation set");
  for (std::int32_t label : train.labels) {
    if (label != 0 && label != 1) {
      throw ContractError("train: labels must be 0 or 1");
    }
  }

  auto t_start = std::chrono::steady_clock::now();
  const std::size_t n = train.size();
  const long steps_per_epoch =
      static_cast<long>((n + cfg.batch_size - 1) / cfg.batch_size);
  const long total_steps = steps_per_epoch * cfg.epochs;

  auto& entries = model.params().entries();
  std::vector<Mat> moment1, moment2;
  for (const auto& e : entries) {
    moment1.push_back(Mat::Zero(e.value.rows(), e.value.cols()));
    moment2.push_back(Mat::Zero(e.value.rows(), e.value.cols()));
  }

  TrainReport report;
  report.config = cfg;
  long global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(perm);
    Rng dropout_rng(derive_seed(cfg.seed ^ 0x9e3779b97f4a7c15ULL,
                                static_cast<std::uint64_t>(epoch)));

    double loss_sum = 0.0;
    for (std::size_t at = 0; at < n; at += cfg.batch_size) {
      std::size_t hi = std::min(n, at + static_cast<std::size_t>(cfg.batch_size));
      std::vector<std::size_t> idxs(perm.begin() + at, perm.begin() + hi);
      auto batch = model.make_batch(train, idxs);

      Tape<Scalar> tape;
      std::vector<typename Tape<Scalar>::Var> pv;
      auto loss = model.build_loss(tape, batch, &dropout_rng, &pv);
      double loss_value = static_cast<double>(tape.value(loss)(0, 0));
      double lr_t = schedule_lr(global_step, total_steps, cfg.learning_rate,
                                cfg.warmup_fraction);
      if (!std::isfinite(loss_value)) {
        std::string joined;
        for (const auto& id : batch.example_ids) {
          if (!joined.empty()) joined += ',';
          joined += id;
        }
        throw NumericError("train: non-finite loss", global_step, lr_t,
                           joined);
      }
      tape.backward(loss);

      std::vector<Mat> grads;
      grads.reserve(pv.size());
      double sq_norm = 0.0;
      for (auto v : pv) {
        grads.push_back(tape.gradient_or_zero(v));
        sq_norm += static_cast<double>(grads.back().squaredNorm());
      }
      if (cfg.clip_norm > 0.0) {
        double norm = std::sqrt(sq_norm);
        if (norm > cfg.clip_norm) {
          Scalar scale = static_cast<Scalar>(cfg.clip_norm / norm);
          for (auto& g : grads) g *= scale;
        }
      }

      const double bc1 = 1.0 - std::pow(cfg.beta1, double(global_step + 1));
      const double bc2 = 1.0 - std::pow(cfg.beta2, double(global_step + 1));
      const Scalar b1 = static_cast<Scalar>(cfg.beta1);
      const Scalar b2 = static_cast<Scalar>(cfg.beta2);
      const Scalar lr = static_cast<Scalar>(lr_t);
      const Scalar decay = static_cast<Scalar>(lr_t * cfg.weight_decay);
      for (std::size_t i = 0; i < entries.size(); ++i) {
        Mat& m = moment1[i];
        Mat& v = moment2[i];
        const Mat& g = grads[i];
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
        Mat update =
            ((m / static_cast<Scalar>(bc1)).array() /
             ((v / static_cast<Scalar>(bc2)).array().sqrt() +
              static_cast<Scalar>(cfg.adam_eps)))
                .matrix();
        Mat before = entries[i].value;
        entries[i].value = before - lr * update;
        if (cfg.weight_decay > 0.0) {
          entries[i].value -= decay * before;
        }
      }
      loss_sum += loss_value * static_cast<double>(hi - at);
      ++global_step;
    }
    report.epoch_losses.push_back(loss_sum / static_cast<double>(n));
    report.epoch_val_metrics.push_back(detail::validation_metrics(
        predict_dataset(model, val, cfg.batch_size), val.labels,
        model.family()));
  }

  report.param_checksum = model.params().checksum();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string param_name;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
};

// Central finite differences with per-parameter step h = eps * max(1, |w|).
// The relative error uses a unit floor: |a - fd| / max(1, |a|, |fd|), so
// vanishing entries are compared absolutely.
template <typename Model>
GradCheckResult gradient_check(Model& model,
                               const typename Model::Batch& batch,
                               double epsilon, Rng* dropout_rng = nullptr) {
  using Scalar = typename Model::ScalarType;
  if (dropout_rng != nullptr) {
    throw ContractError("gradient check: dropout must be disabled");
  }
  if (epsilon < 1e-6 || epsilon > 1e-3) {
    throw ConfigError("gradient check: epsilon must be in [1e-6, 1e-3]");
  }

  Tape<Scalar> tape;
  std::vector<typename Tape<Scalar>::Var> pv;
  auto loss = model.build_loss(tape, batch, nullptr, &pv);
  tape.backward(loss);
  std::vector<typename Tape<Scalar>::Mat> analytic;
  analytic.reserve(pv.size());
  for (auto v : pv) analytic.push_back(tape.gradient_or_zero(v));

  auto loss_at = [&]() {
    Tape<Scalar> t2;
    return static_cast<double>(
        t2.value(model.build_loss(t2, batch, nullptr, nullptr))(0, 0));
  };

  GradCheckResult result;
  auto& entries = model.params().entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& value = entries[i].value;
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        const Scalar saved = value(r, c);
        const double h =
            epsilon * std::max(1.0, std::abs(static_cast<double>(saved)));
        value(r, c) = saved + static_cast<Scalar>(h);
        double up = loss_at();
        value(r, c) = saved - static_cast<Scalar>(h);
        double down = loss_at();
        value(r, c) = saved;
        double fd = (up - down) / (2.0 * h);
        double a = static_cast<double>(analytic[i](r, c));
        double rel = std::abs(a - fd) /
                     std::max({1.0, std::abs(a), std::abs(fd)});
        if (rel > result.max_rel_error) {
          result.max_rel_error = rel;
          result.param_name = entries[i].name;
          result.row = r;
          result.col = c;
        }
      }
    }
  }
  return result;
}

struct TextDataset {
  std::vector<std::string> texts;
  std::vector<std::int32_t> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return texts.size(); }
};

struct AutotuneSpace {
  std::vector<double> learning_rates;
  std::vector<int> epochs;
  std::vector<int> n_max;
  std::vector<int> buckets;
  std::vector<int> dims;
  int budget = 10;
  std::string objective = "f1";  // or "accuracy"

  void validate() const;
};

struct AutotuneTrial {
  int index = 0;
  NGramLinearConfig model_config;
  TrainConfig train_config;
  bool ok = false;
  double objective = 0.0;
  std::string error;
};

struct AutotuneResult {
  NGramLinearConfig best_model_config;
  TrainConfig best_train_config;
  double best_objective = 0.0;
  int best_trial = -1;
  // Replaced with the winning trial's trained model before return.
  NGramLinearModel<float> best_model{NGramLinearConfig{2, 1, 1}, 0};
  std::vector<AutotuneTrial> trials;
};

// Seeded random search over the candidate lists for the n-gram family.
// Failed trials (invalid config, numeric blowup) are logged and skipped.
AutotuneResult autotune_ngram(const AutotuneSpace& space,
                              const TrainConfig& base,
                              const TextDataset& train, const TextDataset& val,
                              std::uint64_t seed);

std::string autotune_trials_jsonl(const std::vector<AutotuneTrial>& trials);

}  // namespace biasdet
