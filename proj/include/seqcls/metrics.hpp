#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqcls/tensor.hpp"

namespace seqcls {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}
  ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> row_major);

  std::size_t classes() const { return classes_; }
  std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts_.at(truth * classes_ + pred); }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_.at(truth * classes_ + pred); }
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t col_sum(std::size_t pred) const;
  std::uint64_t trace() const;
  std::uint64_t total() const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, std::size_t classes);

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0;
  bool operator==(const ClassMetrics&) const = default;
};

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;
  ClassMetrics macro;
  double accuracy = 0;
  std::optional<double> auc;
  std::uint64_t samples = 0;
  std::vector<std::string> warnings;

  bool operator==(const MetricsReport&) const = default;
};

/// Per-class and macro precision/recall/F1. Empty rows or columns yield 0
/// and a warning entry.
MetricsReport precision_recall_f1(const ConfusionMatrix& cm, std::vector<std::string> class_names = {});

/// trace / total. Throws InputError on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

/// Rank-based (Mann-Whitney) AUC with half credit for ties.
double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct AucResult {
  double macro = 0;
  std::vector<std::optional<double>> per_class;  // nullopt for excluded classes
  std::vector<std::size_t> excluded;
};

/// One-vs-rest AUC per class, averaged over classes that have at least one
/// positive and one negative. Throws InputError when no class qualifies.
AucResult auc_ovr(const Tensor<double>& probs, std::span<const int> labels);

template <typename T>
double auc_ovr_macro(const Tensor<T>& probs, std::span<const int> labels) {
  return auc_ovr(probs.template cast<double>(), labels).macro;
}

/// Argmax per row.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& probs) {
  const std::size_t c = probs.shape().back(), rows = probs.size() / c;
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < c; ++i)
      if (probs[r * c + i] > probs[r * c + best]) best = i;
    out[r] = static_cast<int>(best);
  }
  return out;
}

/// Confusion matrix, P/R/F1, accuracy and (when defined) macro AUC in one go.
MetricsReport evaluate_predictions(const Tensor<double>& probs, std::span<const int> labels,
                                   std::vector<std::string> class_names, ConfusionMatrix* cm_out = nullptr);

enum class ReportFormat { table, structured };

ReportFormat report_format_from_string(const std::string& name);

/// Round half to even at `decimals` places.
double round_half_even(double value, int decimals);

std::string emit_report(const MetricsReport& report, ReportFormat format);

/// Inverse of emit_report(..., structured).
MetricsReport parse_structured_report(const std::string& text);

std::string render_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);
std::string emit_confusion_structured(const ConfusionMatrix& cm);
ConfusionMatrix parse_confusion_structured(const std::string& text);

}  // namespace seqcls
