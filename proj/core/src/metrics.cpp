#include "icnn/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "icnn/errors.hpp"
#include "icnn/palette.hpp"

namespace icnn {

ConfusionCounts::ConfusionCounts(int num_classes)
    : counts_(static_cast<std::size_t>(num_classes)) {
  if (num_classes < 2) throw ConfigError("ConfusionCounts: need at least two classes");
}

void ConfusionCounts::accumulate(const LabelMap& predicted, const LabelMap& truth) {
  if (!predicted.same_dims(truth)) {
    throw DataError("accumulate: prediction is " + std::to_string(predicted.height()) + "x" +
                    std::to_string(predicted.width()) + ", truth is " +
                    std::to_string(truth.height()) + "x" + std::to_string(truth.width()));
  }
  if (predicted.num_classes() != num_classes() || truth.num_classes() != num_classes()) {
    throw DataError("accumulate: palette size mismatch");
  }
  auto p = predicted.data();
  auto t = truth.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == t[i]) {
      ++counts_[p[i]].tp;
    } else {
      ++counts_[p[i]].fp;
      ++counts_[t[i]].fn;
    }
  }
}

void ConfusionCounts::merge(const ConfusionCounts& other) {
  if (other.num_classes() != num_classes()) throw DataError("merge: palette size mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    counts_[i].tp += other.counts_[i].tp;
    counts_[i].fp += other.counts_[i].fp;
    counts_[i].fn += other.counts_[i].fn;
  }
}

namespace {

ClassCounts pool(const ConfusionCounts& counts, std::span<const int> classes) {
  ClassCounts s;
  for (int c : classes) {
    if (c < 0 || c >= counts.num_classes()) throw ConfigError("f_measure: class out of range");
    s.tp += counts.at(c).tp;
    s.fp += counts.at(c).fp;
    s.fn += counts.at(c).fn;
  }
  return s;
}

struct Prf {
  double p = 0, r = 0, f = 0;
};

Prf prf(const ClassCounts& s) {
  Prf out;
  if (s.tp + s.fp > 0) out.p = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
  if (s.tp + s.fn > 0) out.r = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
  if (out.p + out.r > 0) out.f = 2 * out.p * out.r / (out.p + out.r);
  return out;
}

}  // namespace

double f_measure(const ConfusionCounts& counts, std::span<const int> classes) {
  if (classes.empty()) throw ConfigError("f_measure: empty class set");
  return prf(pool(counts, classes)).f;
}

std::vector<ReportRow> report(const ConfusionCounts& counts) {
  if (counts.num_classes() != kNumFaceClasses) {
    throw ConfigError("report: expects the nine-class face palette");
  }
  std::vector<ReportRow> rows = {
      {"eye", {kLeftEye, kRightEye}, {}, 0, 0, 0},
      {"eyebrow", {kLeftEyebrow, kRightEyebrow}, {}, 0, 0, 0},
      {"nose", {kNose}, {}, 0, 0, 0},
      {"in_mouth", {kInnerMouth}, {}, 0, 0, 0},
      {"upper_lip", {kUpperLip}, {}, 0, 0, 0},
      {"lower_lip", {kLowerLip}, {}, 0, 0, 0},
      {"mouth_all", {kUpperLip, kInnerMouth, kLowerLip}, {}, 0, 0, 0},
      {"overall", {1, 2, 3, 4, 5, 6, 7, 8}, {}, 0, 0, 0},
  };
  for (auto& row : rows) {
    row.pooled = pool(counts, row.classes);
    const Prf v = prf(row.pooled);
    row.precision = v.p;
    row.recall = v.r;
    row.f = v.f;
  }
  return rows;
}

std::string format_report_text(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %10s %10s %10s %9s %9s %9s\n", "part", "TP", "FP",
                "FN", "P", "R", "F");
  os << "F-measure (micro-averaged pixel counts)\n" << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-10s %10llu %10llu %10llu %9.4f %9.4f %9.4f\n",
                  r.name.c_str(), static_cast<unsigned long long>(r.pooled.tp),
                  static_cast<unsigned long long>(r.pooled.fp),
                  static_cast<unsigned long long>(r.pooled.fn), r.precision, r.recall, r.f);
    os << line;
  }
  return os.str();
}

std::string format_report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "row,classes,tp,fp,fn,f\n";
  char f[32];
  for (const auto& r : rows) {
    os << r.name << ',';
    for (std::size_t i = 0; i < r.classes.size(); ++i) os << (i ? ";" : "") << r.classes[i];
    std::snprintf(f, sizeof f, "%.6f", r.f);
    os << ',' << r.pooled.tp << ',' << r.pooled.fp << ',' << r.pooled.fn << ',' << f << '\n';
  }
  return os.str();
}

}  // namespace icnn
