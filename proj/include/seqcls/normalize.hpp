#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace seqcls {

inline constexpr double kZScoreEpsilon = 1e-8;

/// (x - mean) / (population_std + epsilon) over the whole signal.
/// Statistics accumulate in double regardless of T.
template <typename T>
void zscore_normalize_into(std::span<const T> signal, std::span<T> out, double epsilon = kZScoreEpsilon) {
  const std::size_t n = signal.size();
  double mean = 0;
  for (T v : signal) mean += static_cast<double>(v);
  mean /= static_cast<double>(n);
  double var = 0;
  for (T v : signal) {
    const double d = static_cast<double>(v) - mean;
    var += d * d;
  }
  const double denom = std::sqrt(var / static_cast<double>(n)) + epsilon;
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>((static_cast<double>(signal[i]) - mean) / denom);
}

template <typename T>
std::vector<T> zscore_normalize(std::span<const T> signal, double epsilon = kZScoreEpsilon) {
  std::vector<T> out(signal.size());
  if (!signal.empty()) zscore_normalize_into(signal, std::span<T>(out), epsilon);
  return out;
}

}  // namespace seqcls
