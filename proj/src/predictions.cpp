#include "biasdet/predictions.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "biasdet/errors.hpp"
#include "json.hpp"

namespace biasdet {

namespace {

void check_distribution(const PredictionRecord& r, const std::string& where) {
  if (!(std::isfinite(r.p_neutral) && std::isfinite(r.p_biased)) ||
      r.p_neutral < 0.0 || r.p_neutral > 1.0 || r.p_biased < 0.0 ||
      r.p_biased > 1.0 || std::abs(r.p_neutral + r.p_biased - 1.0) > 1e-6) {
    throw ContractError(where + ": probabilities must form a distribution");
  }
}

std::string missing_list(const std::set<std::string>& ids) {
  std::string out;
  std::size_t shown = 0;
  for (const auto& id : ids) {
    if (shown == 10) {
      out += ", ...";
      break;
    }
    if (!out.empty()) out += ", ";
    out += id;
    ++shown;
  }
  return out;
}

}  // namespace

void write_predictions(const std::vector<PredictionRecord>& records,
                       std::ostream& out) {
  for (const PredictionRecord& r : records) {
    if (r.example_id.empty() || r.model.empty()) {
      throw ContractError(
          "write_predictions: example_id and model must be non-empty");
    }
    check_distribution(r, "write_predictions");
    nlohmann::json j;
    j["example_id"] = r.example_id;
    j["model"] = r.model;
    j["p_neutral"] = r.p_neutral;
    j["p_biased"] = r.p_biased;
    if (r.gold.has_value()) {
      if (*r.gold != 0 && *r.gold != 1) {
        throw ContractError("write_predictions: gold label must be 0 or 1");
      }
      j["gold"] = *r.gold;
    }
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write_predictions: stream write failed");
}

void write_predictions_file(const std::vector<PredictionRecord>& records,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path.string());
  write_predictions(records, out);
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> records;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("predictions line " + std::to_string(line_no) +
                        ": bad JSON: " + e.what());
    }
    PredictionRecord r;
    try {
      for (const auto& [key, value] : j.items()) {
        if (key == "example_id") {
          r.example_id = value.get<std::string>();
        } else if (key == "model") {
          r.model = value.get<std::string>();
        } else if (key == "p_neutral") {
          r.p_neutral = value.get<double>();
        } else if (key == "p_biased") {
          r.p_biased = value.get<double>();
        } else if (key == "gold") {
          r.gold = value.get<int>();
        } else {
          throw FormatError("predictions line " + std::to_string(line_no) +
                            ": unknown key " + key);
        }
      }
      for (const char* field :
           {"example_id", "model", "p_neutral", "p_biased"}) {
        if (!j.contains(field)) {
          throw FormatError("predictions line " + std::to_string(line_no) +
                            ": missing required field " + field);
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("predictions line " + std::to_string(line_no) +
                        ": bad field: " + e.what());
    }
    try {
      check_distribution(r, "read_predictions");
    } catch (const ContractError&) {
      throw FormatError("predictions line " + std::to_string(line_no) +
                        ": probabilities do not sum to 1");
    }
    if (r.gold.has_value() && *r.gold != 0 && *r.gold != 1) {
      throw FormatError("predictions line " + std::to_string(line_no) +
                        ": gold label must be 0 or 1");
    }
    records.push_back(std::move(r));
  }
  if (in.bad()) throw IoError("read_predictions: stream read failed");
  return records;
}

std::vector<PredictionRecord> read_predictions_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  return read_predictions(in);
}

JoinedPredictions join_predictions(
    const std::vector<std::vector<PredictionRecord>>& per_model) {
  if (per_model.empty()) {
    throw DataError("join_predictions: no prediction files");
  }
  JoinedPredictions joined;
  joined.has_gold = true;
  std::map<std::string, std::optional<int>> gold_by_id;

  for (std::size_t m = 0; m < per_model.size(); ++m) {
    const auto& records = per_model[m];
    if (records.empty()) {
      throw DataError("join_predictions: prediction file " +
                      std::to_string(m + 1) + " is empty");
    }
    const std::string& name = records.front().model;
    for (const auto& r : records) {
      if (r.model != name) {
        throw DataError("join_predictions: mixed model names in one file (" +
                        name + " vs " + r.model + ")");
      }
    }
    for (const auto& prior : joined.matrix.model_names) {
      if (prior == name) {
        throw DataError("join_predictions: duplicate model name " + name);
      }
    }

    std::map<std::string, const PredictionRecord*> by_id;
    for (const auto& r : records) {
      if (!by_id.emplace(r.example_id, &r).second) {
        throw DataError("join_predictions: duplicate example id " +
                        r.example_id + " for model " + name);
      }
    }

    if (m == 0) {
      for (const auto& r : records) {
        joined.matrix.example_ids.push_back(r.example_id);
        gold_by_id[r.example_id] = r.gold;
      }
    } else {
      std::set<std::string> missing, extra;
      for (const auto& id : joined.matrix.example_ids) {
        if (by_id.find(id) == by_id.end()) missing.insert(id);
      }
      for (const auto& [id, r] : by_id) {
        if (gold_by_id.find(id) == gold_by_id.end()) extra.insert(id);
      }
      if (!missing.empty() || !extra.empty()) {
        std::string msg = "join_predictions: model " + name +
                          " does not cover the same examples";
        if (!missing.empty()) msg += "; missing: " + missing_list(missing);
        if (!extra.empty()) msg += "; extra: " + missing_list(extra);
        throw DataError(msg);
      }
    }

    std::vector<std::array<double, 2>> rows;
    rows.reserve(joined.matrix.example_ids.size());
    for (const auto& id : joined.matrix.example_ids) {
      const PredictionRecord* r = by_id.at(id);
      rows.push_back({r->p_neutral, r->p_biased});
      auto& gold = gold_by_id.at(id);
      if (r->gold.has_value() != gold.has_value() ||
          (gold.has_value() && *gold != *r->gold)) {
        throw DataError("join_predictions: gold label disagreement on " + id);
      }
    }
    joined.matrix.model_names.push_back(name);
    joined.matrix.probs.push_back(std::move(rows));
  }

  for (const auto& id : joined.matrix.example_ids) {
    const auto& gold = gold_by_id.at(id);
    if (!gold.has_value()) {
      joined.has_gold = false;
      break;
    }
  }
  if (joined.has_gold) {
    for (const auto& id : joined.matrix.example_ids) {
      joined.gold.push_back(*gold_by_id.at(id));
    }
  }
  joined.matrix.validate();
  return joined;
}

}  // namespace biasdet
