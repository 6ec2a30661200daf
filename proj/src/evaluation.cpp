#include "biasdet/evaluation.hpp"

#include <cstdio>
#include <sstream>

#include "biasdet/errors.hpp"
#include "json.hpp"

namespace biasdet {

ConfusionCounts compute_confusion(const std::vector<int>& predicted,
                                  const std::vector<int>& gold) {
  if (predicted.size() != gold.size()) {
    throw ContractError("compute_confusion: length mismatch");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    int p = predicted[i];
    int g = gold[i];
    if ((p != 0 && p != 1) || (g != 0 && g != 1)) {
      throw ContractError("compute_confusion: labels must be 0 or 1");
    }
    if (p == 1 && g == 1) {
      ++c.tp;
    } else if (p == 1 && g == 0) {
      ++c.fp;
    } else if (p == 0 && g == 0) {
      ++c.tn;
    } else {
      ++c.fn;
    }
  }
  return c;
}

MetricsReport compute_metrics(const ConfusionCounts& counts,
                              const std::string& model) {
  if (counts.tp < 0 || counts.fp < 0 || counts.tn < 0 || counts.fn < 0) {
    throw ContractError("compute_metrics: negative count");
  }
  if (counts.total() == 0) {
    throw ContractError("compute_metrics: empty count table");
  }
  MetricsReport r;
  r.model = model;
  r.counts = counts;

  long p_den = counts.tp + counts.fp;
  if (p_den == 0) {
    r.precision = 0.0;
    r.zero_division.precision = true;
  } else {
    r.precision = static_cast<double>(counts.tp) / static_cast<double>(p_den);
  }

  long r_den = counts.tp + counts.fn;
  if (r_den == 0) {
    r.recall = 0.0;
    r.zero_division.recall = true;
  } else {
    r.recall = static_cast<double>(counts.tp) / static_cast<double>(r_den);
  }

  double f_den = r.precision + r.recall;
  if (f_den == 0.0) {
    r.f1 = 0.0;
    r.zero_division.f1 = true;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / f_den;
  }

  r.accuracy = static_cast<double>(counts.tp + counts.tn) /
               static_cast<double>(counts.total());
  return r;
}

std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", value);
  return buf;
}

std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", value * 100.0);
  return buf;
}

std::string render_report_text(const std::vector<MetricsReport>& reports) {
  std::size_t name_width = 5;  // "Model"
  for (const auto& r : reports) {
    name_width = std::max(name_width, r.model.size());
  }
  std::ostringstream out;
  auto pad = [](const std::string& s, std::size_t width) {
    std::string padded = s;
    padded.resize(std::max(width, s.size()), ' ');
    return padded;
  };
  out << pad("Model", name_width) << "  Precision  Recall  F1     Acc\n";
  for (const auto& r : reports) {
    out << pad(r.model, name_width) << "  " << pad(format_metric(r.precision), 9)
        << "  " << pad(format_metric(r.recall), 6) << "  "
        << pad(format_metric(r.f1), 5) << "  " << format_percent(r.accuracy)
        << "\n";
  }
  return out.str();
}

namespace {

std::string csv_escape(const std::string& field) {
  bool needs_quotes = field.find_first_of(",\"\n") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

}  // namespace

std::string render_report_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  out << "model,precision,recall,f1,acc\n";
  for (const auto& r : reports) {
    out << csv_escape(r.model) << ',' << format_metric(r.precision) << ','
        << format_metric(r.recall) << ',' << format_metric(r.f1) << ','
        << format_percent(r.accuracy) << "\n";
  }
  return out.str();
}

std::string metrics_report_json(const MetricsReport& report) {
  nlohmann::json j;
  j["model"] = report.model;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f1"] = report.f1;
  j["accuracy"] = report.accuracy;
  j["zero_division"] = {{"precision", report.zero_division.precision},
                        {"recall", report.zero_division.recall},
                        {"f1", report.zero_division.f1}};
  j["counts"] = {{"tp", report.counts.tp},
                 {"fp", report.counts.fp},
                 {"tn", report.counts.tn},
                 {"fn", report.counts.fn}};
  return j.dump(2) + "\n";
}

MetricsReport metrics_report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("metrics report: bad JSON: ") + e.what());
  }
  try {
    MetricsReport r;
    r.model = j.at("model").get<std::string>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    const auto& z = j.at("zero_division");
    r.zero_division.precision = z.at("precision").get<bool>();
    r.zero_division.recall = z.at("recall").get<bool>();
    r.zero_division.f1 = z.at("f1").get<bool>();
    const auto& c = j.at("counts");
    r.counts.tp = c.at("tp").get<long>();
    r.counts.fp = c.at("fp").get<long>();
    r.counts.tn = c.at("tn").get<long>();
    r.counts.fn = c.at("fn").get<long>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics report: missing field: ") + e.what());
  }
}

}  // namespace biasdet
