#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqcls/data.hpp"
#include "seqcls/models.hpp"
#include "seqcls/optim.hpp"

namespace seqcls {

// ---------------------------------------------------------------------------
// Adaptive dropout controller.

struct DropoutControllerConfig {
  double baseline_gap = 0.02;
  double acc_weight = 1.5;
  double auc_weight = 0.8;
  double loss_weight = 1.0;
  double gap_weight = 1.0;
  double no_learn_threshold = 0.01;
  double no_learn_else = 20.0;
  double stagnation_numerator = 25.0;
  double update_coefficient = 0.05;
  double score_clamp = 2.0;
  double min_rate = 0.05;
  double max_rate = 0.50;

  bool operator==(const DropoutControllerConfig&) const = default;
};

struct CompositeInputs {
  double prev_acc = 0, val_acc = 0;
  double prev_auc = 0, auc = 0;
  double val_loss = 0, prev_loss = 0;
  double train_acc = 0;
};

/// Weighted sum of accuracy drop, AUC drop, loss increase, excess
/// train/validation gap and a stagnation term 25/ValNoLearn, where
/// ValNoLearn = |val_acc - prev_acc| below 0.01 and 20 otherwise.
/// ValNoLearn == 0 yields +infinity.
double composite_score(const CompositeInputs& in, const DropoutControllerConfig& cfg = {});

/// clamp(current + 0.05 * clamp(score, -2, 2), 0.05, 0.50).
double update_dropout(double current, double score, const DropoutControllerConfig& cfg = {});

// ---------------------------------------------------------------------------

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t init = 2;
  std::uint64_t dropout = 3;
  bool operator==(const Seeds&) const = default;
};

struct EarlyStopping {
  bool enabled = false;
  std::size_t patience = 3;  // epochs without validation-AUC improvement
  bool operator==(const EarlyStopping&) const = default;
};

struct TrainConfig {
  Architecture model = Architecture::wavenet;
  std::size_t micro_batch = 32;
  std::size_t accumulation = 2;
  std::size_t max_epochs = 10;
  double learning_rate = 1e-3;
  double focal_gamma = 2.0;
  bool class_weighted_alpha = true;
  bool adaptive_dropout = true;
  EarlyStopping early_stop;
  Seeds seeds;
  DropoutControllerConfig controller;
  std::size_t snapshot_every = 150;  // micro-batches between training snapshots
  std::size_t tape_chunk = 4;        // samples per tape inside a micro-batch

  static TrainConfig wavenet_defaults();
  static TrainConfig tcn_defaults();
  static TrainConfig defaults_for(Architecture arch);
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_accuracy = 0;
  double train_loss = 0;
  double val_accuracy = 0;
  double val_auc = 0;
  double val_loss = 0;
  double macro_f1 = 0;
  double dropout_rate_after = 0;
  bool checkpointed = false;

  bool operator==(const EpochRecord&) const = default;
};

struct BatchSnapshot {
  std::size_t epoch = 0;
  std::size_t batch = 0;  // micro-batches seen this epoch
  double train_loss = 0;  // running means over the epoch so far
  double train_accuracy = 0;

  bool operator==(const BatchSnapshot&) const = default;
};

struct TrainResult {
  ModelState<float> best;
  ModelState<float> last;
  std::size_t best_epoch = 0;
  double best_macro_f1 = -1;
  std::vector<EpochRecord> epochs;
  std::vector<BatchSnapshot> snapshots;
  BatchAuditReport first_epoch_audit;
  bool early_stopped = false;
};

struct TrainCallbacks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const BatchSnapshot&)> on_snapshot;
};

template <typename T>
struct BatchGradients {
  GradientMap<T> grads;
  double loss = 0;  // mean focal loss over the batch
  std::size_t correct = 0;
};

/// Gradient of the batch-mean focal loss. Samples are processed on separate
/// tapes of `chunk` samples and their gradients combined by weight, which
/// equals the single-tape result up to rounding.
template <typename T>
BatchGradients<T> batch_gradients(const ModelState<T>& model, const Tensor<T>& batch, std::span<const int> labels,
                                  const FocalLossConfig& focal, const ForwardOptions& options,
                                  std::size_t chunk = 0);

/// Stacks the selected samples into a [B,T,1] batch.
Tensor<float> gather_batch(const Dataset& data, std::span<const std::size_t> indices);

/// Inference probabilities [N,C] for the selected samples.
Tensor<double> predict_probs(const ModelState<float>& model, const Dataset& data,
                             std::span<const std::size_t> indices, std::size_t chunk = 16);

/// Full training run. Requires a split assignment on `data`.
TrainResult train(ModelState<float> model, const Dataset& data, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

std::string format_epoch_record(const EpochRecord& r);
std::string format_snapshot(const BatchSnapshot& s);

// ---------------------------------------------------------------------------
// Checkpoint file ("SEQC").

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::optional<double> macro_f1;
  std::optional<std::size_t> epoch;
  std::optional<double> dropout_rate;
  bool operator==(const CheckpointInfo&) const = default;
};

struct LoadedCheckpoint {
  ModelState<float> model;
  CheckpointInfo info;
  std::size_t parameter_count = 0;
};

void save_checkpoint(const ModelState<float>& model, std::ostream& out, const CheckpointInfo& info = {});
void save_checkpoint(const ModelState<float>& model, const std::filesystem::path& path,
                     const CheckpointInfo& info = {});
LoadedCheckpoint load_checkpoint(std::istream& in);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace seqcls
