#pragma once

#include <string>
#include <vector>

namespace biasdet {

// Positive class is biased (label 1).
struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long total() const { return tp + fp + tn + fn; }
};

struct ZeroDivisionFlags {
  bool precision = false;
  bool recall = false;
  bool f1 = false;
};

struct MetricsReport {
  std::string model;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  ZeroDivisionFlags zero_division;
  ConfusionCounts counts;
};

// Order-independent counts; throws ContractError on length mismatch or
// out-of-range labels.
ConfusionCounts compute_confusion(const std::vector<int>& predicted,
                                  const std::vector<int>& gold);

// P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R), Acc = (TP+TN)/total.
// Zero denominators yield 0 with the matching flag set; an all-zero count
// table is an undefined report and throws ContractError.
MetricsReport compute_metrics(const ConfusionCounts& counts,
                              const std::string& model = "");

// Table rendering: Precision/Recall/F1 to 3 decimals, accuracy as a percent
// to 2 decimals. Row order as given.
std::string render_report_text(const std::vector<MetricsReport>& reports);
std::string render_report_csv(const std::vector<MetricsReport>& reports);

std::string metrics_report_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const std::string& text);

// Formatting helpers shared by the renderers (and their tests).
std::string format_metric(double value);    // 3 decimals
std::string format_percent(double value);   // "71.61%" style

}  // namespace biasdet
