#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqcls/normalize.hpp"
#include "seqcls/random.hpp"

namespace seqcls {

/// Class ids follow the row order of the reference confusion matrices.
enum class EegClass : std::uint8_t { noise = 0, artifacts = 1, physiological = 2, pathological = 3 };

inline std::vector<std::string> default_class_names() {
  return {"Noise", "Artifacts", "Physiological", "Pathological"};
}

struct Sample {
  std::vector<float> signal;
  int label = 0;
  std::string key;

  bool operator==(const Sample&) const = default;
};

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::vector<Split> of_sample;  // aligned with Dataset::samples

  bool operator==(const SplitAssignment&) const = default;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::size_t seq_len = 0;
  std::vector<Sample> samples;
  std::optional<SplitAssignment> split;

  std::size_t size() const { return samples.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::vector<std::size_t> indices_of(Split which) const;
  std::vector<std::size_t> class_counts(std::span<const std::size_t> indices) const;
  std::vector<int> labels() const;

  /// Checks signal lengths, label range and key uniqueness.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

struct SplitFractions {
  double train = 0.7;
  double val = 0.2;
  double test = 0.1;
};

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
  bool operator==(const SplitCounts&) const = default;
};

/// train = floor(f_train*N), val = floor(f_val*N), test = the remainder.
SplitCounts split_counts(std::size_t n, const SplitFractions& fractions);

/// Seeded shuffle of sample indices, then contiguous train/val/test runs.
SplitAssignment split_dataset(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);

struct BatchAuditReport {
  std::vector<double> dominance;  // max-class fraction per batch
  double fraction_over_threshold = 0;
  double threshold = 0.90;
  double first_k_min = 0, first_k_max = 0;
  std::size_t first_k = 5;
};

/// Largest single-class fraction in one batch.
double batch_dominance(std::span<const int> batch_labels, std::size_t num_classes);

BatchAuditReport audit_batches(const std::vector<std::vector<std::size_t>>& batches,
                               std::span<const int> labels, std::size_t num_classes,
                               double threshold = 0.90, std::size_t first_k = 5);

struct Batches {
  std::vector<std::vector<std::size_t>> batches;
  BatchAuditReport audit;
};

/// Global seeded shuffle then contiguous slicing. With `stratified`, each
/// class is shuffled separately and the classes are interleaved first.
/// `labels` is indexed by sample index.
Batches make_batches(std::span<const std::size_t> indices, std::span<const int> labels,
                     std::size_t num_classes, std::size_t batch_size, std::uint64_t seed,
                     bool stratified = false);

// ---------------------------------------------------------------------------
// Synthetic EEG-like segments.

struct SynthWaveform {
  std::vector<float> signal;
  std::size_t peak_index = 0;  // transient peak; meaningless for noise
};

inline constexpr std::size_t kMinSynthLength = 64;

/// One segment of class `kind`. Physiological and pathological segments drawn
/// from the same seed share background and transient; the pathological one
/// adds a high-frequency burst at the peak.
SynthWaveform synth_waveform(EegClass kind, std::size_t length, double sample_rate, std::uint64_t seed);

/// `n_per_class` segments of each class, keyed "<class>-<index>".
Dataset synth_generate(std::size_t n_per_class, std::size_t length, double sample_rate, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Container file ("EEGC").

inline constexpr std::array<char, 4> kContainerMagic{'E', 'E', 'G', 'C'};
inline constexpr std::uint16_t kContainerVersion = 1;

void container_write(const Dataset& dataset, std::ostream& out);
void container_write(const Dataset& dataset, const std::filesystem::path& path);
Dataset container_read(std::istream& in);
Dataset container_read(const std::filesystem::path& path);

/// One record per line: `label<sep>v1,v2,...` where <sep> is a comma, tab,
/// semicolon or space. Blank lines and lines starting with '#' are skipped.
Dataset read_text_dataset(std::istream& in, std::vector<std::string> class_names);

}  // namespace seqcls
