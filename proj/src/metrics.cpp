#include "seqcls/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqcls/errors.hpp"

namespace seqcls {

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> row_major)
    : classes_(classes), counts_(std::move(row_major)) {
  if (counts_.size() != classes_ * classes_)
    throw InputError("confusion matrix needs " + std::to_string(classes_ * classes_) + " counts, got " +
                     std::to_string(counts_.size()));
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < classes_; ++j) s += at(truth, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += at(i, pred);
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += at(i, i);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
  if (truth.size() != predicted.size())
    throw InputError("confusion matrix: " + std::to_string(truth.size()) + " true labels vs " +
                     std::to_string(predicted.size()) + " predictions");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (int v : {truth[i], predicted[i]})
      if (v < 0 || static_cast<std::size_t>(v) >= classes)
        throw InputError("confusion matrix: label " + std::to_string(v) + " outside [0, " +
                         std::to_string(classes) + ")");
    ++cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
  }
  return cm;
}

MetricsReport precision_recall_f1(const ConfusionMatrix& cm, std::vector<std::string> class_names) {
  const std::size_t c = cm.classes();
  if (class_names.empty())
    for (std::size_t i = 0; i < c; ++i) class_names.push_back("class" + std::to_string(i));
  if (class_names.size() != c) throw InputError("class name count does not match the confusion matrix");

  MetricsReport r;
  r.class_names = std::move(class_names);
  r.samples = cm.total();
  r.accuracy = r.samples ? static_cast<double>(cm.trace()) / static_cast<double>(r.samples) : 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    const auto tp = static_cast<double>(cm.at(i, i));
    const auto col = cm.col_sum(i), row = cm.row_sum(i);
    ClassMetrics m;
    if (col) m.precision = tp / static_cast<double>(col);
    else r.warnings.push_back("class '" + r.class_names[i] + "' was never predicted; precision set to 0");
    if (row) m.recall = tp / static_cast<double>(row);
    else r.warnings.push_back("class '" + r.class_names[i] + "' has no true samples; recall set to 0");
    m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.per_class.push_back(m);
    r.macro.precision += m.precision;
    r.macro.recall += m.recall;
    r.macro.f1 += m.f1;
  }
  if (c) {
    r.macro.precision /= static_cast<double>(c);
    r.macro.recall /= static_cast<double>(c);
    r.macro.f1 /= static_cast<double>(c);
  }
  return r;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw InputError("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

double binary_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw InputError("binary AUC: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // Average ranks (1-based) over tie groups.
  double pos_rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (positive[order[k]]) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InputError("binary AUC needs both positives and negatives");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1) / 2.0) / (np * nn);
}

AucResult auc_ovr(const Tensor<double>& probs, std::span<const int> labels) {
  require_rank(probs, 2, "AUC probabilities");
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  if (labels.size() != n) throw InputError("AUC: label count does not match probability rows");
  AucResult r;
  r.per_class.assign(c, std::nullopt);
  std::vector<double> scores(n);
  std::vector<std::uint8_t> pos(n);
  double total = 0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probs.at(i, k);
      pos[i] = labels[i] == static_cast<int>(k);
      n_pos += pos[i];
    }
    if (n_pos == 0 || n_pos == n) {
      r.excluded.push_back(k);
      continue;
    }
    const double a = binary_auc(scores, pos);
    r.per_class[k] = a;
    total += a;
    ++used;
  }
  if (used == 0) throw InputError("AUC undefined: every sample belongs to one class");
  r.macro = total / static_cast<double>(used);
  return r;
}

MetricsReport evaluate_predictions(const Tensor<double>& probs, std::span<const int> labels,
                                   std::vector<std::string> class_names, ConfusionMatrix* cm_out) {
  require_rank(probs, 2, "evaluation probabilities");
  const auto predicted = argmax_rows(probs);
  ConfusionMatrix cm = confusion_matrix(labels, predicted, probs.dim(1));
  MetricsReport report = precision_recall_f1(cm, std::move(class_names));
  try {
    report.auc = auc_ovr(probs, labels).macro;
  } catch (const InputError&) {
    report.warnings.push_back("AUC undefined for single-class labels");
  }
  if (cm_out) *cm_out = std::move(cm);
  return report;
}

}  // namespace seqcls
