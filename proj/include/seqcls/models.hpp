#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "seqcls/ops.hpp"
#include "seqcls/random.hpp"
#include "seqcls/tape.hpp"
#include "seqcls/tensor.hpp"

namespace seqcls {

enum class Architecture { wavenet, tcn };

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& tag);

inline std::vector<std::size_t> default_dilations() { return {1, 2, 4, 8, 16, 32, 64}; }

struct WaveNetConfig {
  std::vector<std::size_t> dilations = default_dilations();
  std::size_t filters = 32;
  std::size_t kernel_size = 3;
  std::size_t num_classes = 4;
  std::size_t input_length = 15000;
  double dropout_rate = 0.20;  // starting point for the adaptive controller
  double l2_lambda = 1e-4;
  bool skip_projection = false;  // per-block 1x1 on the skip branch

  void validate() const;
  bool operator==(const WaveNetConfig&) const = default;
};

struct TCNConfig {
  std::vector<std::size_t> dilations = default_dilations();
  std::size_t filters = 8;
  std::size_t kernel_size = 2;
  std::size_t convs_per_block = 2;
  double block_dropout = 0.005;
  std::size_t num_classes = 4;
  std::size_t input_length = 15000;
  double l2_lambda = 1e-4;

  void validate() const;
  bool operator==(const TCNConfig&) const = default;
};

using ModelConfig = std::variant<WaveNetConfig, TCNConfig>;

Architecture architecture_of(const ModelConfig& config);
std::size_t num_classes_of(const ModelConfig& config);

/// 1 + convs_per_level * (kernel_size - 1) * sum(dilations).
std::size_t compute_receptive_field(std::size_t kernel_size, std::span<const std::size_t> dilations,
                                    std::size_t convs_per_level);
std::size_t receptive_field(const ModelConfig& config);

/// Closed-form parameter count implied by the config.
std::size_t expected_parameter_count(const ModelConfig& config);

template <typename T>
struct ModelState {
  Architecture architecture = Architecture::wavenet;
  ModelConfig config;
  ParameterStore<T> params;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params) n += p.size();
    return n;
  }

  template <typename U>
  ModelState<U> cast() const {
    ModelState<U> out{architecture, config, {}};
    for (const auto& [name, p] : params) out.params.emplace(name, p.template cast<U>());
    return out;
  }
};

/// He-uniform conv weights, zero biases. WaveNet layout: entry 1x1
/// projection, one dilated conv + swish per dilation with residual and
/// summed skip stream, then a two-conv 1x1 head.
ModelState<float> build_wavenet(const WaveNetConfig& config, Rng& rng);

/// Per block: two weight-normalized causal convs (ReLU, dropout), residual
/// add with a 1x1 projection when channels change, then layer norm.
ModelState<float> build_tcn(const TCNConfig& config, Rng& rng);

ModelState<float> build_model(const ModelConfig& config, Rng& rng);

struct ForwardOptions {
  bool training = false;
  double dropout_rate = 0.0;  // WaveNet only; the TCN uses its fixed block_dropout
  Rng* rng = nullptr;         // required when training with a nonzero rate
  std::vector<Var>* skip_outputs = nullptr;  // WaveNet: receives each block's skip tensor
};

using ParameterVars = std::map<std::string, Var>;

/// Puts every parameter on the tape as a trainable leaf.
template <typename T>
ParameterVars register_parameters(Tape<T>& tape, const ModelState<T>& model);

/// Per-timestep class logits [B,T,C] for an already-normalized batch
/// [B,T,1]. Every layer here is causal.
template <typename T>
Var pre_pool_logits(Tape<T>& tape, const ParameterVars& params, const ModelState<T>& model,
                    Var normalized, const ForwardOptions& options);

/// z-score -> pre_pool_logits -> global average pool -> softmax; [B,C].
template <typename T>
Var forward(Tape<T>& tape, const ParameterVars& params, const ModelState<T>& model, Var batch,
            const ForwardOptions& options);

/// Convenience inference path on a private tape.
template <typename T>
Tensor<T> forward(const ModelState<T>& model, const Tensor<T>& batch, const ForwardOptions& options = {});

/// Per-sample z-score across time of a [B,T,1] batch.
template <typename T>
Tensor<T> normalize_batch(const Tensor<T>& batch);

}  // namespace seqcls
