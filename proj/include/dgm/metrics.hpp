#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "dgm/common.hpp"

namespace dgm {

// K x K tally, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  int k = 0;
  std::vector<int64_t> counts;  // row major
  std::vector<std::string> class_names;

  int64_t& at(int t, int p) { return counts[static_cast<size_t>(t) * static_cast<size_t>(k) + static_cast<size_t>(p)]; }
  int64_t at(int t, int p) const {
    return counts[static_cast<size_t>(t) * static_cast<size_t>(k) + static_cast<size_t>(p)];
  }

  int64_t total() const {
    int64_t s = 0;
    for (int64_t v : counts) s += v;
    return s;
  }

  int64_t trace() const {
    int64_t s = 0;
    for (int i = 0; i < k; ++i) s += at(i, i);
    return s;
  }
};

inline ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                                 int k) {
  if (preds.size() != labels.size())
    fail(ErrorCode::kInvalidArgument, "confusion: prediction/label length mismatch");
  if (k < 1) fail(ErrorCode::kInvalidArgument, "confusion: k must be >= 1");
  ConfusionMatrix cm;
  cm.k = k;
  cm.counts.assign(static_cast<size_t>(k) * static_cast<size_t>(k), 0);
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= k || labels[i] < 0 || labels[i] >= k)
      fail(ErrorCode::kInvalidArgument, "confusion: class index out of range at sample " +
                                            std::to_string(i));
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

inline int64_t correct_count(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    fail(ErrorCode::kInvalidArgument, "correct_count: length mismatch");
  int64_t n = 0;
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++n;
  return n;
}

// Macro-averaged scores; a class with a zero denominator contributes zero to
// its precision/recall/F1 rather than NaN.
struct MetricReport {
  double accuracy = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
  int64_t correct = 0;
  int64_t total = 0;
};

inline MetricReport summarize(const ConfusionMatrix& cm) {
  int64_t total = cm.total();
  if (total <= 0) fail(ErrorCode::kInvalidArgument, "summarize: empty confusion matrix");
  MetricReport r;
  r.total = total;
  r.correct = cm.trace();
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(total);
  for (int c = 0; c < cm.k; ++c) {
    int64_t tp = cm.at(c, c);
    int64_t fp = 0, fn = 0;
    for (int o = 0; o < cm.k; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    double prec = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    double rec = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    double f1 = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    r.precision_macro += prec;
    r.recall_macro += rec;
    r.f1_macro += f1;
  }
  r.precision_macro /= cm.k;
  r.recall_macro /= cm.k;
  r.f1_macro /= cm.k;
  return r;
}

// Percent with one decimal, matching the report tables.
inline std::string format_pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", fraction * 100.0);
  return buf;
}

inline std::string render_confusion(const ConfusionMatrix& cm) {
  std::string out = "true\\pred";
  for (int p = 0; p < cm.k; ++p) {
    out += "\t";
    out += cm.class_names.empty() ? "c" + std::to_string(p) : cm.class_names[static_cast<size_t>(p)];
  }
  out += "\n";
  for (int t = 0; t < cm.k; ++t) {
    out += cm.class_names.empty() ? "c" + std::to_string(t) : cm.class_names[static_cast<size_t>(t)];
    for (int p = 0; p < cm.k; ++p) out += "\t" + std::to_string(cm.at(t, p));
    out += "\n";
  }
  return out;
}

}  // namespace dgm
