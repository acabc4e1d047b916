#include "neurotube/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "neurotube/error.hpp"

namespace neurotube {

namespace {

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_shapes(const Volume& pred, const Volume& truth) {
  if (!(pred.dims == truth.dims) || pred.data.size() != truth.data.size())
    throw ArgumentError("metrics: prediction " + pred.dims.str() + " vs truth " + truth.dims.str());
}

Confusion confusion(const Volume& pred, const Volume& truth, double threshold) {
  Confusion c;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] >= threshold;
    const bool t = truth.data[i] >= 0.5f;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ThresholdMetrics from_confusion(const Confusion& c) {
  ThresholdMetrics m;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

}  // namespace

ThresholdMetrics threshold_metrics(const Volume& pred, const Volume& truth, double threshold) {
  check_shapes(pred, truth);
  if (!(threshold >= 0 && threshold <= 1))
    throw ArgumentError("threshold_metrics: threshold must lie in [0,1]");
  return from_confusion(confusion(pred, truth, threshold));
}

std::vector<double> sweep_thresholds() {
  std::vector<double> t(21);
  for (int i = 0; i <= 20; ++i) t[i] = i / 20.0;
  return t;
}

double trapezoid_auc(std::vector<double> x, std::vector<double> y) {
  if (x.size() != y.size()) throw ArgumentError("trapezoid_auc: length mismatch");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  double area = 0;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto a = order[k - 1], b = order[k];
    area += (x[b] - x[a]) * (y[a] + y[b]) / 2.0;
  }
  return area;
}

MetricsReport curve_summary(const Volume& pred, const Volume& truth, AucMode mode) {
  check_shapes(pred, truth);
  MetricsReport r;
  r.mode = mode;
  r.thresholds = sweep_thresholds();
  for (double t : r.thresholds) {
    const auto c = confusion(pred, truth, t);
    const auto m = from_confusion(c);
    r.precision.push_back(m.precision);
    r.recall.push_back(m.recall);
    r.f1.push_back(m.f1);
    r.fpr.push_back(ratio(c.fp, c.fp + c.tn));
  }
  r.auc = mode == AucMode::precision_recall ? trapezoid_auc(r.recall, r.precision)
                                            : trapezoid_auc(r.fpr, r.recall);
  const auto best = std::max_element(r.f1.begin(), r.f1.end());
  r.top_f1 = *best;
  r.top_f1_threshold = r.thresholds[static_cast<std::size_t>(best - r.f1.begin())];
  return r;
}

void write_report(std::ostream& os, const MetricsReport& r) {
  char buf[160];
  os << "auc_mode = " << (r.mode == AucMode::precision_recall ? "pr" : "roc") << '\n';
  std::snprintf(buf, sizeof buf, "auc = %.9f\ntop_f1 = %.9f\ntop_f1_threshold = %.2f\n", r.auc,
                r.top_f1, r.top_f1_threshold);
  os << buf;
  os << "thresholds = " << r.thresholds.size() << '\n';
  os << "threshold precision recall f1\n";
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.2f %.9f %.9f %.9f\n", r.thresholds[i], r.precision[i],
                  r.recall[i], r.f1[i]);
    os << buf;
  }
}

std::string format_report(const MetricsReport& report) {
  std::ostringstream os;
  write_report(os, report);
  return os.str();
}

}  // namespace neurotube
