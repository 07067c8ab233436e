#include <cmath>

#include "doctest.h"
#include "reference_matrices.hpp"
#include "seqcls/data.hpp"
#include "seqcls/metrics.hpp"
#include "seqcls/ops.hpp"
#include "test_support.hpp"

using namespace seqcls;
using seqcls::testing::kTcnMatrix;
using seqcls::testing::kWaveNetMatrix;

namespace {

struct Expected {
  double precision, recall, f1;
};

void check_report(const MetricsReport& r, const std::vector<Expected>& rows, const Expected& macro) {
  for (std::size_t c = 0; c < rows.size(); ++c) {
    CAPTURE(c);
    CHECK(r.per_class[c].precision == doctest::Approx(rows[c].precision).epsilon(1e-6));
    CHECK(r.per_class[c].recall == doctest::Approx(rows[c].recall).epsilon(1e-6));
    CHECK(r.per_class[c].f1 == doctest::Approx(rows[c].f1).epsilon(1e-6));
  }
  CHECK(r.macro.precision == doctest::Approx(macro.precision).epsilon(1e-6));
  CHECK(r.macro.recall == doctest::Approx(macro.recall).epsilon(1e-6));
  CHECK(r.macro.f1 == doctest::Approx(macro.f1).epsilon(1e-6));
}

}  // namespace

TEST_CASE("confusion matrix counting") {
  const std::vector<int> y{0, 1, 2, 3, 2};
  const auto perfect = confusion_matrix(y, y, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(perfect.at(i, j) == (i == j ? (i == 2 ? 2u : 1u) : 0u));
  CHECK(perfect.total() == 5);

  const std::vector<int> t{0, 1}, p{1, 0};
  const auto anti = confusion_matrix(t, p, 2);
  CHECK(anti.counts() == std::vector<std::uint64_t>{0, 1, 1, 0});

  const std::vector<int> shorter{0};
  CHECK_THROWS_AS(confusion_matrix(t, shorter, 2), InputError);
  const std::vector<int> out_of_range{0, 2};
  CHECK_THROWS_AS(confusion_matrix(t, out_of_range, 2), InputError);

  const ConfusionMatrix wave(4, kWaveNetMatrix);
  CHECK(wave.row_sum(0) == 3563);
  CHECK(wave.row_sum(1) == 3800);
  CHECK(wave.row_sum(2) == 11086);
  CHECK(wave.row_sum(3) == 2447);
  CHECK(wave.total() == 20896);
  CHECK(wave.trace() == 19965);
}

TEST_CASE("relabeling permutes the matrix consistently") {
  Rng rng(1);
  std::vector<int> t(300), p(300);
  for (std::size_t i = 0; i < 300; ++i) {
    t[i] = static_cast<int>(rng() % 4);
    p[i] = static_cast<int>(rng() % 4);
  }
  const std::vector<int> perm{2, 0, 3, 1};
  std::vector<int> tp(300), pp(300);
  for (std::size_t i = 0; i < 300; ++i) {
    tp[i] = perm[static_cast<std::size_t>(t[i])];
    pp[i] = perm[static_cast<std::size_t>(p[i])];
  }
  const auto a = confusion_matrix(t, p, 4), b = confusion_matrix(tp, pp, 4);
  CHECK(a.total() == 300);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(b.at(static_cast<std::size_t>(perm[i]), static_cast<std::size_t>(perm[j])) == a.at(i, j));
}

TEST_CASE("WaveNet test matrix metrics") {
  const auto r = precision_recall_f1(ConfusionMatrix(4, kWaveNetMatrix), default_class_names());
  check_report(r,
               {{0.9971997, 0.9994387, 0.9983179},
                {0.9839510, 0.8873684, 0.9331673},
                {0.9441307, 0.9801552, 0.9618057},
                {0.9066555, 0.8851655, 0.8957816}},
               {0.9579842, 0.9380319, 0.9472681});
  CHECK(accuracy(ConfusionMatrix(4, kWaveNetMatrix)) == doctest::Approx(0.955446).epsilon(1e-6));
  CHECK(r.warnings.empty());
}

TEST_CASE("TCN test matrix metrics") {
  const auto r = precision_recall_f1(ConfusionMatrix(4, kTcnMatrix), default_class_names());
  check_report(r,
               {{0.9997178, 0.9866295, 0.9931305},
                {0.8368996, 0.9909514, 0.9074337},
                {0.9760390, 0.8868112, 0.9292881},
                {0.7806664, 0.8942953, 0.8336266}},
               {0.8983307, 0.9396719, 0.9158697});
  CHECK(accuracy(ConfusionMatrix(4, kTcnMatrix)) == doctest::Approx(0.9240627).epsilon(1e-6));
}

TEST_CASE("degenerate matrices") {
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 4;
  cm.at(1, 1) = 2;
  const auto r = precision_recall_f1(cm);
  CHECK(r.per_class[2] == ClassMetrics{0, 0, 0});
  CHECK(r.warnings.size() == 2);
  CHECK(accuracy(cm) == 1.0);

  ConfusionMatrix wrong(2);
  wrong.at(0, 1) = 3;
  wrong.at(1, 0) = 1;
  CHECK(accuracy(wrong) == 0.0);
  CHECK_THROWS_AS(accuracy(ConfusionMatrix(2)), InputError);

  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint64_t> counts(16);
    for (auto& v : counts) v = rng() % 5;
    const auto m = precision_recall_f1(ConfusionMatrix(4, counts));
    for (const auto& c : m.per_class) {
      for (double v : {c.precision, c.recall, c.f1}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      if (c.precision + c.recall > 0)
        CHECK(c.f1 == doctest::Approx(2 * c.precision * c.recall / (c.precision + c.recall)));
    }
  }
}

TEST_CASE("binary and one-vs-rest AUC") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<std::uint8_t> pos{0, 0, 1, 1};
  CHECK(binary_auc(s, pos) == 0.75);
  const std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
  CHECK(binary_auc(sep, pos) == 1.0);
  const std::vector<double> flat{0.3, 0.3, 0.3, 0.3};
  CHECK(binary_auc(flat, pos) == 0.5);

  Rng rng(3);
  Tensor<double> logits({200, 4});
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < 200; ++i) {
    labels[i] = static_cast<int>(i % 4);
    for (std::size_t c = 0; c < 4; ++c) logits.at(i, c) = gaussian(rng) + (static_cast<int>(c) == labels[i] ? 1.0 : 0.0);
  }
  const auto probs = ops::softmax(logits);
  const double a = auc_ovr_macro(probs, labels);
  CHECK(a > 0.5);
  CHECK(a < 1.0);
  auto transformed = probs;
  for (auto& v : transformed.data()) v = std::exp(3 * v) + 7;
  CHECK(auc_ovr_macro(transformed, labels) == doctest::Approx(a).epsilon(1e-12));

  // Classes without negatives or positives are excluded.
  std::vector<int> three(200);
  for (std::size_t i = 0; i < 200; ++i) three[i] = static_cast<int>(i % 3);
  const auto partial = auc_ovr(probs, three);
  CHECK(partial.excluded == std::vector<std::size_t>{3});
  CHECK_FALSE(partial.per_class[3].has_value());

  const std::vector<int> single(200, 1);
  CHECK_THROWS_AS(auc_ovr(probs, single), InputError);
}

TEST_CASE("rounding and report emission") {
  CHECK(round_half_even(0.125, 2) == doctest::Approx(0.12));
  CHECK(round_half_even(0.375, 2) == doctest::Approx(0.38));
  CHECK(round_half_even(0.9473, 2) == doctest::Approx(0.95));

  auto r = precision_recall_f1(ConfusionMatrix(4, kWaveNetMatrix), default_class_names());
  r.auc = 0.987654321;
  const std::string table = emit_report(r, ReportFormat::table);
  for (const char* block : {"Noise\n", "Artifacts\n", "Physiological\n", "Pathological\n", "Macro avg.\n"})
    CHECK(table.find(block) != std::string::npos);
  CHECK(table.find("0.96") != std::string::npos);
  CHECK(emit_report(r, ReportFormat::table) == table);

  const std::string structured = emit_report(r, ReportFormat::structured);
  CHECK(emit_report(r, ReportFormat::structured) == structured);
  CHECK(parse_structured_report(structured) == r);
  r.auc.reset();
  r.warnings.push_back("something odd");
  CHECK(parse_structured_report(emit_report(r, ReportFormat::structured)) == r);
  CHECK_THROWS_AS(parse_structured_report("{\"record\":\"confusion\"}"), FormatError);
  CHECK_THROWS_AS(report_format_from_string("xml"), ConfigError);

  const ConfusionMatrix cm(4, kTcnMatrix);
  CHECK(parse_confusion_structured(emit_confusion_structured(cm)) == cm);
  const std::string grid = render_confusion(cm, default_class_names());
  CHECK(grid.find("9817") != std::string::npos);
}

TEST_CASE("evaluate predictions end to end") {
  Tensor<double> probs({10, 4}, 0.0);
  std::vector<int> labels(10);
  for (std::size_t i = 0; i < 10; ++i) {
    labels[i] = static_cast<int>(i % 4);
    probs.at(i, i % 4) = 1.0;
  }
  ConfusionMatrix cm;
  const auto r = evaluate_predictions(probs, labels, default_class_names(), &cm);
  CHECK(r.accuracy == 1.0);
  CHECK(cm.trace() == 10);
  CHECK(r.auc.value() == 1.0);
}
