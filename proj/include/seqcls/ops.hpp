#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include "seqcls/random.hpp"
#include "seqcls/tape.hpp"
#include "seqcls/tensor.hpp"

namespace seqcls {

/// Geometry of a 1-D convolution. Kernel weights are laid out
/// (out_channels, in_channels, kernel_size); tap `kernel_size-1` multiplies
/// the current timestep and tap j multiplies t - (kernel_size-1-j)*dilation.
struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_size = 1;
  std::size_t dilation = 1;
  bool causal = true;
  bool weight_normalized = false;

  Shape weight_shape() const { return {out_channels, in_channels, kernel_size}; }
  std::size_t receptive_span() const { return (kernel_size - 1) * dilation + 1; }
  void validate() const;
};

inline constexpr double kLayerNormEps = 1e-5;

namespace ops {

// ---------------------------------------------------------------------------
// Plain forward kernels.

/// x: [B,T,Cin] -> [B,T,Cout]. Implicit zero left-padding of (k-1)*d steps.
/// `bias` may be null.
template <typename T>
Tensor<T> causal_dilated_conv1d(const Tensor<T>& input, const ConvSpec& spec,
                                const Tensor<T>& weights, const Tensor<T>* bias = nullptr);

template <typename T>
Tensor<T> swish(const Tensor<T>& x);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// gain[o] * direction[o] / ||direction[o]||_2, norm over each filter's
/// (in_channels, kernel_size) slice.
template <typename T>
Tensor<T> weight_normalized_weights(const Tensor<T>& direction, const Tensor<T>& gain);

/// Normalizes across the last axis for every leading position.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = kLayerNormEps);

/// Inverted dropout. Identity when `training` is false or rate is 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng& rng);

/// [B,T,C] -> [B,C], mean over time.
template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& x);

/// Row softmax over the last axis with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x);

template <typename T>
T sigmoid(T x) {
  if (x >= 0) return T{1} / (T{1} + std::exp(-x));
  T e = std::exp(x);
  return e / (T{1} + e);
}

// ---------------------------------------------------------------------------
// Tape-recorded versions. Same semantics; gradients flow to every input
// that requires one.

template <typename T>
Var conv1d(Tape<T>& tape, Var x, Var weights, std::optional<Var> bias, const ConvSpec& spec);

template <typename T>
Var weight_norm(Tape<T>& tape, Var direction, Var gain);

template <typename T>
Var swish(Tape<T>& tape, Var x);

template <typename T>
Var relu(Tape<T>& tape, Var x);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b);

template <typename T>
Var sum(Tape<T>& tape, Var x);

template <typename T>
Var layer_norm(Tape<T>& tape, Var x, Var gamma, Var beta, double eps = kLayerNormEps);

template <typename T>
Var dropout(Tape<T>& tape, Var x, double rate, bool training, Rng& rng);

template <typename T>
Var global_average_pool(Tape<T>& tape, Var x);

template <typename T>
Var softmax(Tape<T>& tape, Var x);

}  // namespace ops

/// Central-difference gradient of a scalar function; test oracle for the tape.
template <typename T>
Tensor<T> finite_difference_gradient(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x,
                                     T h) {
  if (!(h > 0)) throw ConfigError("finite difference step must be positive");
  Tensor<T> grad(x.shape());
  Tensor<T> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T orig = probe[i];
    probe[i] = orig + h;
    const T up = f(probe);
    probe[i] = orig - h;
    const T down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

}  // namespace seqcls
