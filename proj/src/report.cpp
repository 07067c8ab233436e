#include <cfenv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "seqcls/errors.hpp"
#include "seqcls/metrics.hpp"

namespace seqcls {

using nlohmann::json;

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "table") return ReportFormat::table;
  if (name == "structured") return ReportFormat::structured;
  throw ConfigError("unknown report format '" + name + "' (expected table or structured)");
}

double round_half_even(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const int mode = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(value * scale) / scale;
  std::fesetround(mode);
  return r;
}

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", round_half_even(v, 2));
  return buf;
}

void metric_block(std::ostringstream& os, const std::string& title, const ClassMetrics& m) {
  char line[96];
  os << title << '\n';
  for (auto [name, value] : {std::pair{"F1", m.f1}, {"Precision", m.precision}, {"Recall", m.recall}}) {
    std::snprintf(line, sizeof line, "  %-18s%8s\n", name, fixed2(value).c_str());
    os << line;
  }
}

json metrics_json(const ClassMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

ClassMetrics metrics_from(const json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

}  // namespace

std::string emit_report(const MetricsReport& r, ReportFormat format) {
  if (format == ReportFormat::structured) {
    json classes = json::array();
    for (std::size_t i = 0; i < r.per_class.size(); ++i) {
      json c = metrics_json(r.per_class[i]);
      c["name"] = r.class_names.at(i);
      classes.push_back(std::move(c));
    }
    json j = {{"record", "metrics"},
              {"samples", r.samples},
              {"accuracy", r.accuracy},
              {"auc", r.auc ? json(*r.auc) : json(nullptr)},
              {"macro", metrics_json(r.macro)},
              {"classes", std::move(classes)},
              {"warnings", r.warnings}};
    return j.dump() + "\n";
  }

  std::ostringstream os;
  char line[96];
  std::snprintf(line, sizeof line, "%-20s%8s\n", "Class/Metric", "Value");
  os << line;
  for (std::size_t i = 0; i < r.per_class.size(); ++i) metric_block(os, r.class_names.at(i), r.per_class[i]);
  metric_block(os, "Macro avg.", r.macro);
  std::snprintf(line, sizeof line, "%-20s%8s\n", "Accuracy", fixed2(r.accuracy).c_str());
  os << line;
  std::snprintf(line, sizeof line, "%-20s%8s\n", "AUC (macro OvR)", r.auc ? fixed2(*r.auc).c_str() : "n/a");
  os << line;
  std::snprintf(line, sizeof line, "%-20s%8llu\n", "Samples", static_cast<unsigned long long>(r.samples));
  os << line;
  for (const auto& w : r.warnings) os << "warning: " << w << '\n';
  return os.str();
}

MetricsReport parse_structured_report(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("record") != "metrics") throw FormatError("structured report: not a metrics record");
    MetricsReport r;
    r.samples = j.at("samples").get<std::uint64_t>();
    r.accuracy = j.at("accuracy").get<double>();
    if (!j.at("auc").is_null()) r.auc = j.at("auc").get<double>();
    r.macro = metrics_from(j.at("macro"));
    for (const auto& c : j.at("classes")) {
      r.class_names.push_back(c.at("name").get<std::string>());
      r.per_class.push_back(metrics_from(c));
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("structured report: ") + e.what());
  }
}

std::string render_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  std::ostringstream os;
  char cell[64];
  std::snprintf(cell, sizeof cell, "%-16s", "True/Pred");
  os << cell;
  for (std::size_t j = 0; j < cm.classes(); ++j) {
    std::snprintf(cell, sizeof cell, "%14s", names.at(j).c_str());
    os << cell;
  }
  os << '\n';
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    std::snprintf(cell, sizeof cell, "%-16s", names.at(i).c_str());
    os << cell;
    for (std::size_t j = 0; j < cm.classes(); ++j) {
      std::snprintf(cell, sizeof cell, "%14llu", static_cast<unsigned long long>(cm.at(i, j)));
      os << cell;
    }
    os << '\n';
  }
  return os.str();
}

std::string emit_confusion_structured(const ConfusionMatrix& cm) {
  json j = {{"record", "confusion"}, {"classes", cm.classes()}, {"counts", cm.counts()}};
  return j.dump() + "\n";
}

ConfusionMatrix parse_confusion_structured(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("record") != "confusion") throw FormatError("structured report: not a confusion record");
    return ConfusionMatrix(j.at("classes").get<std::size_t>(), j.at("counts").get<std::vector<std::uint64_t>>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("structured confusion: ") + e.what());
  }
}

}  // namespace seqcls
