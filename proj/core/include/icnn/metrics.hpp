#pragma once

// Pixel-count F-measure. Counts are pooled over all images before P/R/F are computed
// (micro aggregation); background is never scored.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "icnn/tensor.hpp"

namespace icnn {

struct ClassCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  bool operator==(const ClassCounts&) const = default;
};

class ConfusionCounts {
 public:
  explicit ConfusionCounts(int num_classes = 9);

  /// Adds one prediction/truth pair; both must share dims and palette size.
  void accumulate(const LabelMap& predicted, const LabelMap& truth);
  /// Associative, commutative merge.
  void merge(const ConfusionCounts& other);

  int num_classes() const { return static_cast<int>(counts_.size()); }
  const ClassCounts& at(int cls) const { return counts_.at(static_cast<std::size_t>(cls)); }
  bool operator==(const ConfusionCounts&) const = default;

 private:
  std::vector<ClassCounts> counts_;
};

/// Micro-averaged F over `classes`; 0 when precision + recall is 0.
double f_measure(const ConfusionCounts& counts, std::span<const int> classes);

struct ReportRow {
  std::string name;
  std::vector<int> classes;
  ClassCounts pooled;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// Rows: eye, eyebrow, nose, in-mouth, upper lip, lower lip, mouth (all), overall.
std::vector<ReportRow> report(const ConfusionCounts& counts);
std::string format_report_text(const std::vector<ReportRow>& rows);
/// "row,classes,tp,fp,fn,f" lines with a header.
std::string format_report_csv(const std::vector<ReportRow>& rows);

}  // namespace icnn
