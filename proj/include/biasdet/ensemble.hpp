#pragma once

#include <array>
#include <string>
#include <vector>

namespace biasdet {

// Per-model class probabilities over a shared, identically ordered example
// list. probs[m][n] = [p_neutral, p_biased] of model m on example n.
struct PredictionMatrix {
  std::vector<std::string> model_names;
  std::vector<std::string> example_ids;
  std::vector<std::vector<std::array<double, 2>>> probs;

  std::size_t models() const { return model_names.size(); }
  std::size_t examples() const { return example_ids.size(); }

  // ContractError when shapes disagree or a row is not a distribution
  // (sum within 1e-6 of 1, entries in [0,1]).
  void validate() const;
};

struct EnsembleSpec {
  std::vector<std::string> members;
  std::vector<double> weights;
  std::string objective = "f1";  // or "accuracy"
  double grid_resolution = 0.05;
  double threshold = 0.5;

  void validate() const;
  std::string to_json() const;
  static EnsembleSpec from_json(const std::string& text);
};

// Convex combination of member probabilities. Each output entry is clamped
// into the member min/max envelope so the convexity bound survives float
// rounding.
std::vector<std::array<double, 2>> combine(const PredictionMatrix& preds,
                                           const std::vector<double>& weights);

// Label 1 iff p_biased >= threshold (threshold ties go to 1).
std::vector<int> decide(const std::vector<std::array<double, 2>>& probs,
                        double threshold = 0.5);

struct FitResult {
  std::vector<double> weights;
  double objective_value = 0.0;
};

// Exhaustive simplex grid with entries in {0, r, 2r, ..., 1}; argmax of the
// objective, ties to the lexicographically smallest weight vector. The grid
// contains every unit vector, so the result is never worse than any single
// member.
FitResult fit_weights(const PredictionMatrix& preds,
                      const std::vector<int>& gold,
                      const std::string& objective, double grid_resolution,
                      double threshold = 0.5);

}  // namespace biasdet
