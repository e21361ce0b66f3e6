#pragma once
// Classification metrics: accuracy, macro-F1, weighted-F1 and per-class
// precision/recall/F1. Macro averaging excludes classes absent from both
// truth and predictions; classes present in truth but never predicted
// contribute F1 = 0. Weighted-F1 weights by truth support.

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "relens/core.hpp"

namespace relens {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long support = 0;   // occurrences in truth
  long long predicted = 0;  // occurrences in predictions
};

struct MetricsReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::array<ClassMetrics, kNumLabels> per_class;
  long long total = 0;
};

inline MetricsReport score(const std::vector<EsciLabel>& truth,
                           const std::vector<EsciLabel>& predicted) {
  if (truth.empty()) throw DataError("score: empty input");
  if (truth.size() != predicted.size()) {
    throw DataError("score: length mismatch (" + std::to_string(truth.size()) + " vs " +
                    std::to_string(predicted.size()) + ")");
  }
  long long confusion[kNumLabels][kNumLabels] = {};
  long long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = label_code(truth[i]);
    const int p = label_code(predicted[i]);
    ++confusion[t][p];
    if (t == p) ++correct;
  }

  MetricsReport rep;
  rep.total = static_cast<long long>(truth.size());
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(rep.total);

  double macro_sum = 0.0;
  int macro_classes = 0;
  double weighted_sum = 0.0;
  for (int c = 0; c < kNumLabels; ++c) {
    auto& m = rep.per_class[static_cast<std::size_t>(c)];
    const long long tp = confusion[c][c];
    long long fp = 0, fn = 0;
    for (int o = 0; o < kNumLabels; ++o) {
      if (o == c) continue;
      fp += confusion[o][c];
      fn += confusion[c][o];
    }
    m.support = tp + fn;
    m.predicted = tp + fp;
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    if (m.support > 0 || m.predicted > 0) {
      macro_sum += m.f1;
      ++macro_classes;
    }
    weighted_sum += static_cast<double>(m.support) * m.f1;
  }
  rep.macro_f1 = macro_classes > 0 ? macro_sum / macro_classes : 0.0;
  rep.weighted_f1 = weighted_sum / static_cast<double>(rep.total);
  return rep;
}

// ── comparison tables ────────────────────────────────────────────────────

enum class MetricName { Accuracy, MacroF1, WeightedF1 };

inline double metric_value(const MetricsReport& r, MetricName m) {
  switch (m) {
    case MetricName::Accuracy: return r.accuracy;
    case MetricName::MacroF1: return r.macro_f1;
    case MetricName::WeightedF1: return r.weighted_f1;
  }
  return 0.0;
}

struct NamedReport {
  std::string name;
  MetricsReport report;
};

// Stable sort descending by the chosen metric; equal values keep input order.
inline std::vector<NamedReport> compare(std::vector<NamedReport> reports,
                                        MetricName by = MetricName::MacroF1) {
  if (reports.empty()) throw DataError("compare: need at least one report");
  std::stable_sort(reports.begin(), reports.end(),
                   [by](const NamedReport& a, const NamedReport& b) {
                     return metric_value(a.report, by) > metric_value(b.report, by);
                   });
  return reports;
}

inline std::string metrics_table(const std::vector<NamedReport>& reports) {
  std::ostringstream out;
  out << "model\taccuracy\tmacro_f1\tweighted_f1\n";
  for (const auto& r : reports) {
    out << r.name << '\t' << fmt_double(r.report.accuracy) << '\t'
        << fmt_double(r.report.macro_f1) << '\t' << fmt_double(r.report.weighted_f1)
        << '\n';
  }
  return out.str();
}

inline std::string metrics_detail(const MetricsReport& r) {
  std::ostringstream out;
  out << "accuracy\t" << fmt_double(r.accuracy) << '\n';
  out << "macro_f1\t" << fmt_double(r.macro_f1) << '\n';
  out << "weighted_f1\t" << fmt_double(r.weighted_f1) << '\n';
  out << "class\tprecision\trecall\tf1\tsupport\n";
  for (int c = 0; c < kNumLabels; ++c) {
    const auto& m = r.per_class[static_cast<std::size_t>(c)];
    out << to_string(static_cast<EsciLabel>(c)) << '\t' << fmt_double(m.precision) << '\t'
        << fmt_double(m.recall) << '\t' << fmt_double(m.f1) << '\t' << m.support << '\n';
  }
  return out.str();
}

}  // namespace relens
