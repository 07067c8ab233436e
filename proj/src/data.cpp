#include "seqcls/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <set>
#include <string>

#include "seqcls/errors.hpp"

namespace seqcls {

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val" || name == "validation") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

std::vector<std::size_t> Dataset::indices_of(Split which) const {
  if (!split) throw ConfigError("dataset has no split assignment");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split->of_sample.size(); ++i)
    if (split->of_sample[i] == which) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::class_counts(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (auto i : indices) ++counts.at(static_cast<std::size_t>(samples.at(i).label));
  return counts;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

void Dataset::validate() const {
  if (class_names.empty()) throw InputError("dataset has no classes");
  std::set<std::string> keys;
  for (const auto& s : samples) {
    if (s.signal.size() != seq_len)
      throw InputError("sample '" + s.key + "' has length " + std::to_string(s.signal.size()) +
                       ", dataset length is " + std::to_string(seq_len));
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= class_names.size())
      throw InputError("sample '" + s.key + "' has label " + std::to_string(s.label) + " outside [0, " +
                       std::to_string(class_names.size()) + ")");
    if (!keys.insert(s.key).second) throw InputError("duplicate sample key '" + s.key + "'");
  }
  if (split && split->of_sample.size() != samples.size())
    throw InputError("split assignment does not cover every sample");
}

SplitCounts split_counts(std::size_t n, const SplitFractions& f) {
  if (n < 3) throw ConfigError("need at least 3 samples to split, got " + std::to_string(n));
  for (double x : {f.train, f.val, f.test})
    if (!(x >= 0 && x <= 1)) throw ConfigError("split fractions must lie in [0, 1]");
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  const double nd = static_cast<double>(n);
  // The small bias keeps exact products such as 0.7*30 from flooring down.
  SplitCounts c;
  c.train = static_cast<std::size_t>(std::floor(f.train * nd + 1e-9));
  c.val = static_cast<std::size_t>(std::floor(f.val * nd + 1e-9));
  c.train = std::min(c.train, n);
  c.val = std::min(c.val, n - c.train);
  c.test = n - c.train - c.val;
  return c;
}

SplitAssignment split_dataset(std::size_t n, const SplitFractions& fractions, std::uint64_t seed) {
  const SplitCounts c = split_counts(n, fractions);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  SplitAssignment a{seed, std::vector<Split>(n, Split::test)};
  for (std::size_t r = 0; r < c.train; ++r) a.of_sample[order[r]] = Split::train;
  for (std::size_t r = c.train; r < c.train + c.val; ++r) a.of_sample[order[r]] = Split::val;
  return a;
}

double batch_dominance(std::span<const int> batch_labels, std::size_t num_classes) {
  if (batch_labels.empty()) return 0.0;
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : batch_labels) ++counts.at(static_cast<std::size_t>(y));
  const auto top = *std::max_element(counts.begin(), counts.end());
  return static_cast<double>(top) / static_cast<double>(batch_labels.size());
}

BatchAuditReport audit_batches(const std::vector<std::vector<std::size_t>>& batches,
                               std::span<const int> labels, std::size_t num_classes, double threshold,
                               std::size_t first_k) {
  BatchAuditReport r;
  r.threshold = threshold;
  r.first_k = first_k;
  std::size_t over = 0;
  std::vector<int> ys;
  for (const auto& batch : batches) {
    ys.clear();
    for (auto i : batch) ys.push_back(labels[i]);
    const double d = batch_dominance(ys, num_classes);
    r.dominance.push_back(d);
    if (d > threshold) ++over;
  }
  if (!batches.empty()) {
    r.fraction_over_threshold = static_cast<double>(over) / static_cast<double>(batches.size());
    const std::size_t k = std::min(first_k, r.dominance.size());
    r.first_k_min = *std::min_element(r.dominance.begin(), r.dominance.begin() + k);
    r.first_k_max = *std::max_element(r.dominance.begin(), r.dominance.begin() + k);
  }
  return r;
}

Batches make_batches(std::span<const std::size_t> indices, std::span<const int> labels,
                     std::size_t num_classes, std::size_t batch_size, std::uint64_t seed, bool stratified) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  Rng rng(seed);
  std::vector<std::size_t> order(indices.begin(), indices.end());
  if (!stratified) {
    std::shuffle(order.begin(), order.end(), rng);
  } else {
    std::vector<std::vector<std::size_t>> per_class(num_classes);
    for (auto i : indices) per_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
    for (auto& members : per_class) std::shuffle(members.begin(), members.end(), rng);
    order.clear();
    for (std::size_t round = 0; order.size() < indices.size(); ++round)
      for (const auto& members : per_class)
        if (round < members.size()) order.push_back(members[round]);
  }
  Batches out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  out.audit = audit_batches(out.batches, labels, num_classes);
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

float parse_float(std::string_view token, std::size_t line) {
  token = trim(token);
  float v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size())
    throw InputError("line " + std::to_string(line) + ": bad number '" + std::string(token) + "'");
  return v;
}

}  // namespace

Dataset read_text_dataset(std::istream& in, std::vector<std::string> class_names) {
  Dataset ds;
  ds.class_names = std::move(class_names);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto sep = sv.find_first_of(",\t; ");
    if (sep == std::string_view::npos)
      throw InputError("line " + std::to_string(lineno) + ": expected '<label><sep><values>'");
    Sample s;
    std::string_view label = trim(sv.substr(0, sep));
    auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), s.label);
    if (ec != std::errc{} || ptr != label.data() + label.size())
      throw InputError("line " + std::to_string(lineno) + ": bad label '" + std::string(label) + "'");
    std::string_view rest = sv.substr(sep + 1);
    while (true) {
      const auto comma = rest.find(',');
      s.signal.push_back(parse_float(rest.substr(0, comma), lineno));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (ds.samples.empty()) ds.seq_len = s.signal.size();
    s.key = "line-" + std::to_string(lineno);
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

}  // namespace seqcls
