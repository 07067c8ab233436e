#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqcls/tape.hpp"
#include "seqcls/tensor.hpp"

namespace seqcls {

/// w_c = N_total / (C * N_c). Throws ConfigError on an empty class.
std::vector<double> class_weights_inverse_frequency(std::span<const std::size_t> counts);

struct FocalLossConfig {
  double gamma = 2.0;
  std::vector<double> alpha;  // one weight per class
  double epsilon = 1e-12;     // log clamp

  void validate(std::size_t num_classes) const;
};

/// Mean over the batch of -alpha_y * (1 - p_y)^gamma * log(max(p_y, eps)).
template <typename T>
double focal_loss(const Tensor<T>& probs, std::span<const int> labels, const FocalLossConfig& config);

/// Per-sample focal term for a single probability; used by property tests.
double focal_term(double p, double alpha, double gamma, double epsilon = 1e-12);

namespace ops {
/// Tape-recorded focal loss over probabilities [B,C]; returns a scalar.
template <typename T>
Var focal_loss(Tape<T>& tape, Var probs, std::span<const int> labels, const FocalLossConfig& config);
}  // namespace ops

/// True for parameters that receive the L2 penalty: convolution weights and
/// weight-norm directions. Biases, gains and normalization affines do not.
bool is_l2_regularized(const std::string& parameter_name);

template <typename T>
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2_lambda = 1e-4;
  std::uint64_t step = 0;
  GradientMap<T> first_moment;
  GradientMap<T> second_moment;
};

/// Bias-corrected Adam with coupled L2 (lambda * w added to the gradient
/// before the moment updates). Throws NumericalError if a gradient holds
/// NaN/Inf and ContractError if a parameter has no gradient; `params` is
/// left untouched in both cases.
template <typename T>
void adam_step(AdamState<T>& state, ParameterStore<T>& params, const GradientMap<T>& grads);

/// Elementwise mean across micro-batch gradient maps.
template <typename T>
GradientMap<T> accumulate_gradients(std::span<const GradientMap<T>> micro_grads);

}  // namespace seqcls
