#include "biasdet/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "biasdet/errors.hpp"
#include "biasdet/evaluation.hpp"
#include "json.hpp"

namespace biasdet {

namespace {

void validate_row(const std::array<double, 2>& row, const char* what) {
  if (row[0] < 0.0 || row[0] > 1.0 || row[1] < 0.0 || row[1] > 1.0 ||
      std::abs(row[0] + row[1] - 1.0) > 1e-6) {
    throw ContractError(std::string(what) + ": row is not a distribution");
  }
}

}  // namespace

void PredictionMatrix::validate() const {
  if (model_names.empty()) {
    throw ContractError("prediction matrix: no models");
  }
  if (example_ids.empty()) {
    throw ContractError("prediction matrix: no examples");
  }
  if (probs.size() != model_names.size()) {
    throw ContractError("prediction matrix: probs/models size mismatch");
  }
  std::set<std::string> names(model_names.begin(), model_names.end());
  if (names.size() != model_names.size()) {
    throw ContractError("prediction matrix: duplicate model names");
  }
  for (const auto& rows : probs) {
    if (rows.size() != example_ids.size()) {
      throw ContractError("prediction matrix: ragged probability rows");
    }
    for (const auto& row : rows) validate_row(row, "prediction matrix");
  }
}

void EnsembleSpec::validate() const {
  if (members.empty()) throw ConfigError("ensemble spec: no members");
  std::set<std::string> names(members.begin(), members.end());
  if (names.size() != members.size()) {
    throw ConfigError("ensemble spec: duplicate member names");
  }
  if (weights.size() != members.size()) {
    throw ConfigError("ensemble spec: weights/members size mismatch");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("ensemble spec: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("ensemble spec: weights must sum to 1");
  }
  if (objective != "f1" && objective != "accuracy") {
    throw ConfigError("ensemble spec: objective must be f1 or accuracy");
  }
  if (!(grid_resolution > 0.0) || grid_resolution > 1.0) {
    throw ConfigError("ensemble spec: grid_resolution must be in (0,1]");
  }
  if (!(threshold > 0.0) || !(threshold < 1.0)) {
    throw ConfigError("ensemble spec: threshold must be in (0,1)");
  }
}

std::string EnsembleSpec::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["members"] = members;
  j["weights"] = weights;
  j["objective"] = objective;
  j["grid_resolution"] = grid_resolution;
  j["threshold"] = threshold;
  return j.dump(2) + "\n";
}

EnsembleSpec EnsembleSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("ensemble spec: bad JSON: ") + e.what());
  }
  EnsembleSpec spec;
  bool saw_version = false;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "format_version") {
        if (!value.is_number_integer() || value.get<int>() != 1) {
          throw IncompatibilityError(
              "ensemble spec: unsupported format_version");
        }
        saw_version = true;
      } else if (key == "members") {
        spec.members = value.get<std::vector<std::string>>();
      } else if (key == "weights") {
        spec.weights = value.get<std::vector<double>>();
      } else if (key == "objective") {
        spec.objective = value.get<std::string>();
      } else if (key == "grid_resolution") {
        spec.grid_resolution = value.get<double>();
      } else if (key == "threshold") {
        spec.threshold = value.get<double>();
      } else {
        throw FormatError("ensemble spec: unknown key " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ensemble spec: bad field: ") + e.what());
  }
  if (!saw_version) {
    throw IncompatibilityError("ensemble spec: missing format_version");
  }
  spec.validate();
  return spec;
}

std::vector<std::array<double, 2>> combine(const PredictionMatrix& preds,
                                           const std::vector<double>& weights) {
  preds.validate();
  if (weights.size() != preds.models()) {
    throw ContractError("combine: weight count differs from model count");
  }
  double weight_sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || w > 1.0) {
      throw ContractError("combine: weights must lie in [0, 1]");
    }
    weight_sum += w;
  }
  if (std::abs(weight_sum - 1.0) > 1e-6) {
    throw ContractError("combine: weights must sum to 1");
  }
  std::vector<std::array<double, 2>> out(preds.examples());
  for (std::size_t n = 0; n < preds.examples(); ++n) {
    for (std::size_t c = 0; c < 2; ++c) {
      double sum = 0.0;
      double lo = preds.probs[0][n][c];
      double hi = lo;
      for (std::size_t m = 0; m < preds.models(); ++m) {
        double p = preds.probs[m][n][c];
        sum += weights[m] * p;
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
      out[n][c] = std::clamp(sum, lo, hi);
    }
  }
  return out;
}

std::vector<int> decide(const std::vector<std::array<double, 2>>& probs,
                        double threshold) {
  std::vector<int> labels(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    labels[i] = probs[i][1] >= threshold ? 1 : 0;
  }
  return labels;
}

namespace {

double objective_of(const std::vector<int>& predicted,
                    const std::vector<int>& gold,
                    const std::string& objective) {
  MetricsReport m = compute_metrics(compute_confusion(predicted, gold));
  return objective == "accuracy" ? m.accuracy : m.f1;
}

// Lexicographically ascending enumeration of weight vectors with `steps`
// grid units split over the remaining positions.
void enumerate(std::vector<int>& counts, std::size_t at, int remaining,
               const std::function<void(const std::vector<int>&)>& visit) {
  if (at + 1 == counts.size()) {
    counts[at] = remaining;
    visit(counts);
    return;
  }
  for (int c = 0; c <= remaining; ++c) {
    counts[at] = c;
    enumerate(counts, at + 1, remaining - c, visit);
  }
}

}  // namespace

FitResult fit_weights(const PredictionMatrix& preds,
                      const std::vector<int>& gold,
                      const std::string& objective, double grid_resolution,
                      double threshold) {
  preds.validate();
  if (gold.size() != preds.examples()) {
    throw ContractError("fit_weights: gold length differs from predictions");
  }
  for (int g : gold) {
    if (g != 0 && g != 1) {
      throw ContractError("fit_weights: gold labels must be 0 or 1");
    }
  }
  if (preds.models() > 5) {
    throw ConfigError("fit_weights: at most 5 members supported");
  }
  if (objective != "f1" && objective != "accuracy") {
    throw ConfigError("fit_weights: objective must be f1 or accuracy");
  }
  const double steps_real = 1.0 / grid_resolution;
  const int steps = static_cast<int>(std::llround(steps_real));
  if (!(grid_resolution > 0.0) || steps < 1 ||
      std::abs(steps_real - steps) > 1e-9) {
    throw ConfigError("fit_weights: grid resolution must divide 1 evenly");
  }

  FitResult best;
  bool have_best = false;
  std::vector<int> counts(preds.models());
  enumerate(counts, 0, steps, [&](const std::vector<int>& cs) {
    std::vector<double> w(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
      w[i] = cs[i] * grid_resolution;
    }
    double value = objective_of(decide(combine(preds, w), threshold), gold,
                                objective);
    if (!have_best || value > best.objective_value) {
      have_best = true;
      best.weights = std::move(w);
      best.objective_value = value;
    }
  });
  return best;
}

}  // namespace biasdet
