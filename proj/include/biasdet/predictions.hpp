#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "biasdet/ensemble.hpp"

namespace biasdet {

struct PredictionRecord {
  std::string example_id;
  std::string model;
  double p_neutral = 0.0;
  double p_biased = 0.0;
  std::optional<int> gold;

  bool operator==(const PredictionRecord&) const = default;
};

// JSONL, one record per line. Writing validates the probability invariant
// (sum within 1e-6 of 1); reading reports the 1-based line number of any
// malformed line. Floats survive the round trip exactly.
void write_predictions(const std::vector<PredictionRecord>& records,
                       std::ostream& out);
void write_predictions_file(const std::vector<PredictionRecord>& records,
                            const std::filesystem::path& path);
std::vector<PredictionRecord> read_predictions(std::istream& in);
std::vector<PredictionRecord> read_predictions_file(
    const std::filesystem::path& path);

struct JoinedPredictions {
  PredictionMatrix matrix;
  std::vector<int> gold;  // empty when has_gold is false
  bool has_gold = false;
};

// Aligns one prediction file per model into a PredictionMatrix. Example
// order follows the first model; every other model must cover exactly the
// same id set (missing/extra ids are a DataError naming the ids). Gold
// labels, when present, must be present everywhere and agree per example.
JoinedPredictions join_predictions(
    const std::vector<std::vector<PredictionRecord>>& per_model);

}  // namespace biasdet
