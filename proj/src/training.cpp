#include "seqcls/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "seqcls/metrics.hpp"

namespace seqcls {

double composite_score(const CompositeInputs& in, const DropoutControllerConfig& cfg) {
  const double train_acc = std::max(in.train_acc, 1e-8);
  const double rel_gap = (train_acc - in.val_acc) / train_acc;
  const double delta = std::abs(in.val_acc - in.prev_acc);
  const double no_learn = delta < cfg.no_learn_threshold ? delta : cfg.no_learn_else;
  const double stagnation =
      no_learn == 0.0 ? std::numeric_limits<double>::infinity() : cfg.stagnation_numerator / no_learn;
  return cfg.acc_weight * (in.prev_acc - in.val_acc) + cfg.auc_weight * (in.prev_auc - in.auc) +
         cfg.loss_weight * (in.val_loss - in.prev_loss) + cfg.gap_weight * (rel_gap - cfg.baseline_gap) +
         stagnation;
}

double update_dropout(double current, double score, const DropoutControllerConfig& cfg) {
  const double s = std::isnan(score) ? 0.0 : std::clamp(score, -cfg.score_clamp, cfg.score_clamp);
  return std::clamp(current + cfg.update_coefficient * s, cfg.min_rate, cfg.max_rate);
}

TrainConfig TrainConfig::wavenet_defaults() {
  TrainConfig c;
  c.model = Architecture::wavenet;
  c.micro_batch = 32;
  c.accumulation = 2;
  c.early_stop = {false, 3};
  c.adaptive_dropout = true;
  return c;
}

TrainConfig TrainConfig::tcn_defaults() {
  TrainConfig c;
  c.model = Architecture::tcn;
  c.micro_batch = 16;
  c.accumulation = 1;
  c.early_stop = {true, 3};
  c.adaptive_dropout = false;
  return c;
}

TrainConfig TrainConfig::defaults_for(Architecture arch) {
  return arch == Architecture::wavenet ? wavenet_defaults() : tcn_defaults();
}

void TrainConfig::validate() const {
  if (micro_batch < 1) throw ConfigError("micro_batch must be >= 1");
  if (accumulation < 1) throw ConfigError("accumulation must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (!(focal_gamma >= 0)) throw ConfigError("focal_gamma must be >= 0");
  if (early_stop.enabled && early_stop.patience < 1) throw ConfigError("early stopping patience must be >= 1");
  if (!(controller.min_rate >= 0 && controller.min_rate <= controller.max_rate && controller.max_rate < 1))
    throw ConfigError("controller rate bounds must satisfy 0 <= min_rate <= max_rate < 1");
  if (snapshot_every < 1) throw ConfigError("snapshot_every must be >= 1");
}

Tensor<float> gather_batch(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ConfigError("cannot build an empty batch");
  const std::size_t len = data.seq_len;
  Tensor<float> batch({indices.size(), len, 1});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& s = data.samples.at(indices[b]).signal;
    std::copy(s.begin(), s.end(), batch.data().begin() + static_cast<std::ptrdiff_t>(b * len));
  }
  return batch;
}

template <typename T>
BatchGradients<T> batch_gradients(const ModelState<T>& model, const Tensor<T>& batch, std::span<const int> labels,
                                  const FocalLossConfig& focal, const ForwardOptions& options, std::size_t chunk) {
  require_rank(batch, 3, "training batch");
  const std::size_t n = batch.dim(0), steps = batch.dim(1);
  if (labels.size() != n) throw InputError("batch and label counts differ");
  if (chunk == 0) chunk = n;

  BatchGradients<T> out;
  for (const auto& [name, p] : model.params) out.grads.emplace(name, Tensor<T>(p.shape()));
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t m = std::min(chunk, n - start);
    Tensor<T> part({m, steps, 1});
    std::copy_n(batch.data().begin() + static_cast<std::ptrdiff_t>(start * steps), m * steps, part.data().begin());
    Tape<T> tape;
    const ParameterVars vars = register_parameters(tape, model);
    Var probs = forward(tape, vars, model, tape.constant(std::move(part)), options);
    const auto ys = labels.subspan(start, m);
    Var loss = ops::focal_loss(tape, probs, ys, focal);
    tape.backward(loss);

    const double weight = static_cast<double>(m) / static_cast<double>(n);
    out.loss += weight * static_cast<double>(tape.value(loss).item());
    const auto predicted = argmax_rows(tape.value(probs));
    for (std::size_t i = 0; i < m; ++i) out.correct += predicted[i] == ys[i];
    for (auto& [name, g] : out.grads) {
      const Tensor<T> part_grad = tape.grad(vars.at(name));
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<T>(weight) * part_grad[i];
    }
  }
  return out;
}

template BatchGradients<float> batch_gradients(const ModelState<float>&, const Tensor<float>&, std::span<const int>,
                                               const FocalLossConfig&, const ForwardOptions&, std::size_t);
template BatchGradients<double> batch_gradients(const ModelState<double>&, const Tensor<double>&,
                                                std::span<const int>, const FocalLossConfig&, const ForwardOptions&,
                                                std::size_t);

Tensor<double> predict_probs(const ModelState<float>& model, const Dataset& data, std::span<const std::size_t> indices,
                             std::size_t chunk) {
  const std::size_t classes = num_classes_of(model.config);
  Tensor<double> probs({std::max<std::size_t>(indices.size(), 1), classes});
  for (std::size_t start = 0; start < indices.size(); start += chunk) {
    const auto part = indices.subspan(start, std::min(chunk, indices.size() - start));
    const Tensor<float> p = forward(model, gather_batch(data, part));
    for (std::size_t i = 0; i < p.size(); ++i) probs[start * classes + i] = p[i];
  }
  if (indices.empty()) return Tensor<double>();
  return probs;
}

namespace {

std::vector<int> labels_of(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<int> ys;
  ys.reserve(indices.size());
  for (auto i : indices) ys.push_back(data.samples[i].label);
  return ys;
}

double current_dropout(const ModelState<float>& model, double adaptive_rate) {
  if (const auto* t = std::get_if<TCNConfig>(&model.config)) return t->block_dropout;
  return adaptive_rate;
}

}  // namespace

TrainResult train(ModelState<float> model, const Dataset& data, const TrainConfig& config,
                  const TrainCallbacks& callbacks) {
  config.validate();
  if (config.model != model.architecture)
    throw ConfigError("training config targets " + to_string(config.model) + " but the model is " +
                      to_string(model.architecture));
  if (!data.split) throw ConfigError("training needs a dataset with a split assignment");
  if (num_classes_of(model.config) != data.num_classes())
    throw ConfigError("model predicts " + std::to_string(num_classes_of(model.config)) + " classes, dataset has " +
                      std::to_string(data.num_classes()));
  const auto train_idx = data.indices_of(Split::train);
  const auto val_idx = data.indices_of(Split::val);
  if (train_idx.empty()) throw ConfigError("training split is empty");
  if (val_idx.empty()) throw ConfigError("validation split is empty");

  FocalLossConfig focal;
  focal.gamma = config.focal_gamma;
  focal.alpha = config.class_weighted_alpha
                    ? class_weights_inverse_frequency(data.class_counts(train_idx))
                    : std::vector<double>(data.num_classes(), 1.0);

  AdamState<float> adam;
  adam.learning_rate = config.learning_rate;
  adam.l2_lambda = std::visit([](const auto& c) { return c.l2_lambda; }, model.config);

  double rate = 0.0;
  if (const auto* w = std::get_if<WaveNetConfig>(&model.config)) rate = w->dropout_rate;

  const auto all_labels = data.labels();
  const auto val_labels = labels_of(data, val_idx);
  TrainResult result;
  double best_auc = -1.0;
  std::size_t since_auc_improved = 0;
  std::uint64_t dropout_stream = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Batches plan = make_batches(train_idx, all_labels, data.num_classes(), config.micro_batch,
                                mix_seed(config.seeds.data, epoch), false);
    if (epoch == 1) result.first_epoch_audit = plan.audit;

    double loss_sum = 0;
    std::size_t seen = 0, correct = 0;
    std::vector<GradientMap<float>> pending;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const auto& idx = plan.batches[b];
      Rng rng(mix_seed(config.seeds.dropout, dropout_stream++));
      ForwardOptions options{true, current_dropout(model, rate), &rng, nullptr};
      const auto ys = labels_of(data, idx);
      auto step = batch_gradients(model, gather_batch(data, idx), ys, focal, options, config.tape_chunk);
      if (!std::isfinite(step.loss))
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", micro-batch " +
                             std::to_string(b + 1));
      loss_sum += step.loss * static_cast<double>(idx.size());
      seen += idx.size();
      correct += step.correct;
      pending.push_back(std::move(step.grads));
      if (pending.size() == config.accumulation || b + 1 == plan.batches.size()) {
        adam_step(adam, model.params, accumulate_gradients<float>(pending));
        pending.clear();
      }
      if ((b + 1) % config.snapshot_every == 0) {
        BatchSnapshot snap{epoch, b + 1, loss_sum / static_cast<double>(seen),
                           static_cast<double>(correct) / static_cast<double>(seen)};
        result.snapshots.push_back(snap);
        if (callbacks.on_snapshot) callbacks.on_snapshot(snap);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    const Tensor<double> val_probs = predict_probs(model, data, val_idx);
    const MetricsReport report = evaluate_predictions(val_probs, val_labels, data.class_names);
    rec.val_accuracy = report.accuracy;
    rec.val_auc = report.auc.value_or(0.5);
    rec.val_loss = focal_loss(val_probs, val_labels, focal);
    rec.macro_f1 = report.macro.f1;
    if (!std::isfinite(rec.val_loss)) throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));

    if (model.architecture == Architecture::wavenet && config.adaptive_dropout && !result.epochs.empty()) {
      const EpochRecord& prev = result.epochs.back();
      const CompositeInputs in{prev.val_accuracy, rec.val_accuracy, prev.val_auc, rec.val_auc,
                               rec.val_loss,     prev.val_loss,    rec.train_accuracy};
      rate = update_dropout(rate, composite_score(in, config.controller), config.controller);
    }
    rec.dropout_rate_after = current_dropout(model, rate);

    if (rec.macro_f1 > result.best_macro_f1) {
      result.best_macro_f1 = rec.macro_f1;
      result.best_epoch = epoch;
      result.best = model;
      rec.checkpointed = true;
    }
    result.epochs.push_back(rec);
    if (callbacks.on_epoch) callbacks.on_epoch(rec);

    if (rec.val_auc > best_auc) {
      best_auc = rec.val_auc;
      since_auc_improved = 0;
    } else {
      ++since_auc_improved;
    }
    if (config.early_stop.enabled && since_auc_improved >= config.early_stop.patience) {
      result.early_stopped = true;
      break;
    }
  }
  result.last = std::move(model);
  return result;
}

std::string format_epoch_record(const EpochRecord& r) {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "epoch=%zu train_accuracy=%.6f train_loss=%.6f val_accuracy=%.6f val_auc=%.6f val_loss=%.6f "
                "macro_f1=%.6f dropout_rate_after=%.6f checkpoint=%d",
                r.epoch, r.train_accuracy, r.train_loss, r.val_accuracy, r.val_auc, r.val_loss, r.macro_f1,
                r.dropout_rate_after, r.checkpointed ? 1 : 0);
  return buf;
}

std::string format_snapshot(const BatchSnapshot& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "snapshot epoch=%zu batch=%zu train_loss=%.6f train_accuracy=%.6f", s.epoch,
                s.batch, s.train_loss, s.train_accuracy);
  return buf;
}

}  // namespace seqcls
