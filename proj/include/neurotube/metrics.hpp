#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "neurotube/volume.hpp"

namespace neurotube {

struct ThresholdMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Binarizes `pred` at p >= threshold and scores it against `truth`.
/// Any 0/0 ratio is reported as 0.
ThresholdMetrics threshold_metrics(const Volume& pred, const Volume& truth, double threshold);

enum class AucMode { precision_recall, roc };

struct MetricsReport {
  std::vector<double> thresholds;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<double> fpr;  // false-positive rate per threshold, for ROC mode
  AucMode mode = AucMode::precision_recall;
  double auc = 0;
  double top_f1 = 0;
  double top_f1_threshold = 0;
};

/// The 21 sweep thresholds 0.00, 0.05, ..., 1.00.
std::vector<double> sweep_thresholds();

/// Trapezoidal area under (x, y) points after a stable sort by x.
double trapezoid_auc(std::vector<double> x, std::vector<double> y);

/// Sweeps the 21 thresholds. PR mode integrates precision over recall;
/// ROC mode integrates recall over false-positive rate.
MetricsReport curve_summary(const Volume& pred, const Volume& truth,
                            AucMode mode = AucMode::precision_recall);

/// Key/value summary followed by a per-threshold table.
void write_report(std::ostream& os, const MetricsReport& report);
std::string format_report(const MetricsReport& report);

}  // namespace neurotube
