#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "biasdet/ensemble.hpp"
#include "biasdet/errors.hpp"
#include "biasdet/evaluation.hpp"
#include "biasdet/rng.hpp"
#include "biasdet/training.hpp"
#include "json.hpp"
#include "support/synthetic.hpp"

using namespace biasdet;

namespace {

struct Fixture {
  TextDataset train;
  TextDataset val;
};

Fixture small_sets() {
  auto split = testsupport::make_intensifier_split(60, 24, 99);
  return {std::move(split.train), std::move(split.test)};
}

AutotuneSpace singleton_space(double lr) {
  AutotuneSpace space;
  space.learning_rates = {lr};
  space.epochs = {1};
  space.n_max = {1};
  space.buckets = {1024};
  space.dims = {8};
  space.budget = 1;
  return space;
}

TrainConfig base_config() {
  TrainConfig tc;
  tc.batch_size = 16;
  tc.max_seq_len = 32;
  return tc;
}

template <typename T>
bool in_list(const std::vector<T>& list, T v) {
  return std::find(list.begin(), list.end(), v) != list.end();
}

// The same final-epoch validation metric the search optimizes, recomputed
// from the returned model through the shared evaluation path.
double recompute_objective(AutotuneResult& result, const TextDataset& val,
                           const std::string& objective) {
  Dataset<NGramLinearModel<float>::Example> ds;
  for (const auto& text : val.texts) {
    ds.examples.push_back(result.best_model.featurize(text));
  }
  ds.labels = val.labels;
  ds.ids = val.ids;
  auto probs =
      predict_dataset(result.best_model, ds, result.best_train_config.batch_size);
  std::vector<int> predicted = decide(probs, 0.5);
  std::vector<int> gold(val.labels.begin(), val.labels.end());
  MetricsReport m = compute_metrics(compute_confusion(predicted, gold), "m");
  return objective == "f1" ? m.f1 : m.accuracy;
}

}  // namespace

TEST_CASE("a budget of one returns that single trial as the winner") {
  auto fx = small_sets();
  AutotuneSpace space = singleton_space(0.5);
  auto result = autotune_ngram(space, base_config(), fx.train, fx.val, 7);

  REQUIRE(result.trials.size() == 1);
  CHECK(result.best_trial == 0);
  CHECK(result.trials[0].ok);
  CHECK(result.trials[0].objective == result.best_objective);
  CHECK(result.best_model_config.buckets == 1024);
  CHECK(result.best_model_config.dim == 8);
  CHECK(result.best_model_config.n_max == 1);
  CHECK(result.best_train_config.learning_rate == 0.5);
  CHECK(result.best_train_config.epochs == 1);
  CHECK(result.best_model.config().buckets == 1024);
}

TEST_CASE("sampled candidates come from the lists with per-trial seeds") {
  auto fx = small_sets();
  AutotuneSpace space;
  space.learning_rates = {0.1, 0.5, 1.0};
  space.epochs = {1, 2};
  space.n_max = {1, 2};
  space.buckets = {512, 4096};
  space.dims = {4, 8};
  space.budget = 8;
  const std::uint64_t seed = 21;
  auto result = autotune_ngram(space, base_config(), fx.train, fx.val, seed);

  REQUIRE(result.trials.size() == 8);
  for (const auto& t : result.trials) {
    CHECK(in_list(space.learning_rates, t.train_config.learning_rate));
    CHECK(in_list(space.epochs, t.train_config.epochs));
    CHECK(in_list(space.n_max, t.model_config.n_max));
    CHECK(in_list(space.buckets, t.model_config.buckets));
    CHECK(in_list(space.dims, t.model_config.dim));
    CHECK(t.train_config.seed ==
          derive_seed(seed, 2 * static_cast<std::uint64_t>(t.index) + 1));
    CHECK(t.train_config.batch_size == 16);
  }

  // Winner = first trial attaining the maximum objective.
  int first_best = -1;
  double best = -1.0;
  for (const auto& t : result.trials) {
    if (t.ok && t.objective > best) {
      best = t.objective;
      first_best = t.index;
    }
  }
  CHECK(result.best_trial == first_best);
  CHECK(result.best_objective == best);

  SUBCASE("the same seed reproduces the search exactly") {
    auto again = autotune_ngram(space, base_config(), fx.train, fx.val, seed);
    REQUIRE(again.trials.size() == result.trials.size());
    for (std::size_t i = 0; i < result.trials.size(); ++i) {
      CHECK(again.trials[i].model_config.buckets ==
            result.trials[i].model_config.buckets);
      CHECK(again.trials[i].model_config.dim ==
            result.trials[i].model_config.dim);
      CHECK(again.trials[i].model_config.n_max ==
            result.trials[i].model_config.n_max);
      CHECK(again.trials[i].train_config.learning_rate ==
            result.trials[i].train_config.learning_rate);
      CHECK(again.trials[i].objective == result.trials[i].objective);
    }
    CHECK(again.best_trial == result.best_trial);
    CHECK(again.best_objective == result.best_objective);
  }

  SUBCASE("a different seed derives different trial seeds") {
    auto other = autotune_ngram(space, base_config(), fx.train, fx.val, 22);
    CHECK(other.trials[0].train_config.seed !=
          result.trials[0].train_config.seed);
  }
}

TEST_CASE("the reported objective matches an independent recomputation") {
  auto fx = small_sets();

  SUBCASE("f1") {
    AutotuneSpace space = singleton_space(0.5);
    space.learning_rates = {0.1, 0.5};
    space.budget = 3;
    space.objective = "f1";
    auto result = autotune_ngram(space, base_config(), fx.train, fx.val, 5);
    CHECK(recompute_objective(result, fx.val, "f1") == result.best_objective);
  }
  SUBCASE("accuracy") {
    AutotuneSpace space = singleton_space(0.5);
    space.objective = "accuracy";
    auto result = autotune_ngram(space, base_config(), fx.train, fx.val, 5);
    CHECK(recompute_objective(result, fx.val, "accuracy") ==
          result.best_objective);
  }
}

TEST_CASE("ties on the objective keep the earliest trial") {
  auto split = testsupport::make_intensifier_split(800, 100, 99);
  AutotuneSpace space = singleton_space(0.1);
  space.epochs = {4};
  space.buckets = {4096};
  space.budget = 3;
  auto result =
      autotune_ngram(space, base_config(), split.train, split.test, 13);

  REQUIRE(result.trials.size() == 3);
  for (const auto& t : result.trials) {
    REQUIRE(t.ok);
    CHECK(t.objective == result.trials[0].objective);
  }
  CHECK(result.best_trial == 0);
}

TEST_CASE("failing trials are logged with their error and skipped") {
  auto fx = small_sets();
  AutotuneSpace space = singleton_space(0.5);
  space.learning_rates = {-1.0, 0.5};
  space.budget = 8;
  auto result = autotune_ngram(space, base_config(), fx.train, fx.val, 3);

  int failed = 0;
  int succeeded = 0;
  for (const auto& t : result.trials) {
    if (t.ok) {
      ++succeeded;
      CHECK(t.error.empty());
      CHECK(t.train_config.learning_rate == 0.5);
    } else {
      ++failed;
      CHECK_FALSE(t.error.empty());
      CHECK(t.train_config.learning_rate == -1.0);
    }
  }
  CHECK(failed > 0);
  CHECK(succeeded > 0);
  CHECK(result.trials[static_cast<std::size_t>(result.best_trial)].ok);
  CHECK(result.best_train_config.learning_rate == 0.5);
}

TEST_CASE("a search where every trial fails is a configuration error") {
  auto fx = small_sets();
  AutotuneSpace space = singleton_space(-1.0);
  space.budget = 3;
  CHECK_THROWS_WITH_AS(
      autotune_ngram(space, base_config(), fx.train, fx.val, 3),
      doctest::Contains("every trial failed"), ConfigError);
}

TEST_CASE("empty inputs and malformed spaces are refused") {
  auto fx = small_sets();
  AutotuneSpace good = singleton_space(0.5);
  TextDataset empty;

  CHECK_THROWS_AS(autotune_ngram(good, base_config(), empty, fx.val, 1),
                  ConfigError);
  CHECK_THROWS_AS(autotune_ngram(good, base_config(), fx.train, empty, 1),
                  ConfigError);

  AutotuneSpace bad = good;
  bad.budget = 0;
  CHECK_THROWS_AS(autotune_ngram(bad, base_config(), fx.train, fx.val, 1),
                  ConfigError);
  bad = good;
  bad.dims.clear();
  CHECK_THROWS_AS(autotune_ngram(bad, base_config(), fx.train, fx.val, 1),
                  ConfigError);
  bad = good;
  bad.objective = "auc";
  CHECK_THROWS_AS(autotune_ngram(bad, base_config(), fx.train, fx.val, 1),
                  ConfigError);
}

TEST_CASE("the trial log serializes one self-contained json line per trial") {
  auto fx = small_sets();
  AutotuneSpace space = singleton_space(0.5);
  space.learning_rates = {-1.0, 0.5};
  space.budget = 6;
  auto result = autotune_ngram(space, base_config(), fx.train, fx.val, 3);

  std::istringstream lines(autotune_trials_jsonl(result.trials));
  std::string line;
  std::size_t i = 0;
  while (std::getline(lines, line)) {
    REQUIRE(i < result.trials.size());
    const AutotuneTrial& t = result.trials[i];
    auto j = nlohmann::json::parse(line);

    CHECK(j.at("trial").get<int>() == t.index);
    const auto& c = j.at("config");
    CHECK(c.at("n_max").get<int>() == t.model_config.n_max);
    CHECK(c.at("buckets").get<int>() == t.model_config.buckets);
    CHECK(c.at("dim").get<int>() == t.model_config.dim);
    CHECK(c.at("learning_rate").get<double>() ==
          t.train_config.learning_rate);
    CHECK(c.at("epochs").get<int>() == t.train_config.epochs);
    CHECK(c.at("seed").get<std::uint64_t>() == t.train_config.seed);
    CHECK(c.size() == 6);

    if (t.ok) {
      CHECK(j.at("objective").get<double>() == t.objective);
      CHECK_FALSE(j.contains("error"));
      CHECK(j.size() == 3);
    } else {
      CHECK(j.at("objective").is_null());
      CHECK(j.at("error").get<std::string>() == t.error);
      CHECK(j.size() == 4);
    }
    ++i;
  }
  CHECK(i == result.trials.size());
}
