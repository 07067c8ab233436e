#include "seqcls/ops.hpp"

#include <cmath>
#include <string>

namespace seqcls {

void ConvSpec::validate() const {
  if (in_channels == 0 || out_channels == 0 || kernel_size == 0)
    throw ConfigError("convolution channels and kernel size must be positive");
  if (dilation < 1) throw ConfigError("convolution dilation must be >= 1");
  if (!causal) throw ConfigError("only causal convolutions are supported");
}

namespace ops {
namespace {

template <typename T>
void check_conv_inputs(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& w,
                       const Tensor<T>* bias) {
  spec.validate();
  require_rank(x, 3, "conv1d input");
  if (x.dim(2) != spec.in_channels)
    throw ShapeError("conv1d input has " + std::to_string(x.dim(2)) + " channels, spec expects " +
                     std::to_string(spec.in_channels));
  if (w.shape() != spec.weight_shape())
    throw ConfigError("conv1d weights " + shape_string(w.shape()) + " do not match spec " +
                      shape_string(spec.weight_shape()));
  if (bias && bias->shape() != Shape{spec.out_channels})
    throw ConfigError("conv1d bias " + shape_string(bias->shape()) + " does not match " +
                      std::to_string(spec.out_channels) + " output channels");
}

// Re-layout (Cout, Cin, K) weights as [K][Cin][Cout] so the innermost loops
// run over a contiguous output-channel row.
template <typename T>
std::vector<T> taps_in_out(const Tensor<T>& w, const ConvSpec& s) {
  std::vector<T> r(w.size());
  for (std::size_t o = 0; o < s.out_channels; ++o)
    for (std::size_t i = 0; i < s.in_channels; ++i)
      for (std::size_t j = 0; j < s.kernel_size; ++j)
        r[(j * s.in_channels + i) * s.out_channels + o] = w.at(o, i, j);
  return r;
}

// [K][Cout][Cin] for the input-gradient pass.
template <typename T>
std::vector<T> taps_out_in(const Tensor<T>& w, const ConvSpec& s) {
  std::vector<T> r(w.size());
  for (std::size_t o = 0; o < s.out_channels; ++o)
    for (std::size_t i = 0; i < s.in_channels; ++i)
      for (std::size_t j = 0; j < s.kernel_size; ++j)
        r[(j * s.out_channels + o) * s.in_channels + i] = w.at(o, i, j);
  return r;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
}

}  // namespace

template <typename T>
Tensor<T> causal_dilated_conv1d(const Tensor<T>& input, const ConvSpec& spec,
                                const Tensor<T>& weights, const Tensor<T>* bias) {
  check_conv_inputs(input, spec, weights, bias);
  const std::size_t batch = input.dim(0), steps = input.dim(1);
  const std::size_t cin = spec.in_channels, cout = spec.out_channels, k = spec.kernel_size;
  const auto wt = taps_in_out(weights, spec);
  Tensor<T> out({batch, steps, cout});
  const T* x = input.data().data();
  T* y = out.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      T* yrow = y + (b * steps + t) * cout;
      if (bias)
        for (std::size_t o = 0; o < cout; ++o) yrow[o] = (*bias)[o];
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t back = (k - 1 - j) * spec.dilation;
        if (back > t) continue;
        const T* xrow = x + (b * steps + t - back) * cin;
        const T* wj = wt.data() + j * cin * cout;
        for (std::size_t i = 0; i < cin; ++i) {
          const T xv = xrow[i];
          const T* wrow = wj + i * cout;
          for (std::size_t o = 0; o < cout; ++o) yrow[o] += wrow[o] * xv;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> swish(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.data()) v = v * sigmoid(v);
  return y;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.data()) v = v > 0 ? v : T{0};
  return y;
}

template <typename T>
Tensor<T> weight_normalized_weights(const Tensor<T>& direction, const Tensor<T>& gain) {
  if (direction.rank() < 1 || gain.shape() != Shape{direction.dim(0)})
    throw ShapeError("weight norm: gain " + shape_string(gain.shape()) +
                     " must hold one value per filter of " + shape_string(direction.shape()));
  const std::size_t filters = direction.dim(0);
  const std::size_t slice = direction.size() / filters;
  Tensor<T> w = direction;
  for (std::size_t o = 0; o < filters; ++o) {
    T sq = 0;
    for (std::size_t i = 0; i < slice; ++i) sq += direction[o * slice + i] * direction[o * slice + i];
    const T norm = std::sqrt(sq);
    if (!(norm > 0))
      throw DegenerateParameterError("weight norm: filter " + std::to_string(o) +
                                     " has a zero-norm direction");
    const T scale = gain[o] / norm;
    for (std::size_t i = 0; i < slice; ++i) w[o * slice + i] *= scale;
  }
  return w;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  const std::size_t c = x.shape().back();
  require_shape(gamma, {c}, "layer_norm gamma");
  require_shape(beta, {c}, "layer_norm beta");
  Tensor<T> y(x.shape());
  const std::size_t rows = x.size() / c;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data().data() + r * c;
    T* yr = y.data().data() + r * c;
    T mean = 0;
    for (std::size_t i = 0; i < c; ++i) mean += xr[i];
    mean /= static_cast<T>(c);
    T var = 0;
    for (std::size_t i = 0; i < c; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<T>(c);
    const T inv = T{1} / std::sqrt(var + static_cast<T>(eps));
    for (std::size_t i = 0; i < c; ++i) yr[i] = gamma[i] * (xr[i] - mean) * inv + beta[i];
  }
  return y;
}

namespace {

template <typename T>
Tensor<T> dropout_mask(const Shape& shape, double rate, Rng& rng) {
  Tensor<T> mask(shape);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& m : mask.data()) m = uniform01(rng) < rate ? T{0} : keep_scale;
  return mask;
}

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
}

}  // namespace

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng& rng) {
  check_rate(rate);
  if (!training || rate == 0.0) return x;
  Tensor<T> mask = dropout_mask<T>(x.shape(), rate, rng);
  Tensor<T> y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return y;
}

template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& x) {
  require_rank(x, 3, "global_average_pool input");
  const std::size_t batch = x.dim(0), steps = x.dim(1), c = x.dim(2);
  Tensor<T> y({batch, c});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t i = 0; i < c; ++i) y.at(b, i) += x.at(b, t, i);
    for (std::size_t i = 0; i < c; ++i) y.at(b, i) /= static_cast<T>(steps);
  }
  return y;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  const std::size_t c = x.shape().back();
  const std::size_t rows = x.size() / c;
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data().data() + r * c;
    T* yr = y.data().data() + r * c;
    T mx = xr[0];
    for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, xr[i]);
    T total = 0;
    for (std::size_t i = 0; i < c; ++i) total += (yr[i] = std::exp(xr[i] - mx));
    for (std::size_t i = 0; i < c; ++i) yr[i] /= total;
  }
  return y;
}

// ---------------------------------------------------------------------------

template <typename T>
Var conv1d(Tape<T>& tape, Var x, Var weights, std::optional<Var> bias, const ConvSpec& spec) {
  Tensor<T> y = causal_dilated_conv1d(tape.value(x), spec, tape.value(weights),
                                      bias ? &tape.value(*bias) : nullptr);
  auto backward = [x, weights, bias, spec](Tape<T>& tp, const Tensor<T>& gy) {
    const Tensor<T>& xv = tp.value(x);
    const std::size_t batch = xv.dim(0), steps = xv.dim(1);
    const std::size_t cin = spec.in_channels, cout = spec.out_channels, k = spec.kernel_size;
    const T* g = gy.data().data();
    const T* xd = xv.data().data();

    if (Tensor<T>* gb = bias ? tp.grad_slot(*bias) : nullptr) {
      for (std::size_t r = 0; r < batch * steps; ++r)
        for (std::size_t o = 0; o < cout; ++o) (*gb)[o] += g[r * cout + o];
    }
    if (Tensor<T>* gw = tp.grad_slot(weights)) {
      std::vector<T> acc(k * cin * cout, T{0});  // [K][Cin][Cout]
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < steps; ++t) {
          const T* grow = g + (b * steps + t) * cout;
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t back = (k - 1 - j) * spec.dilation;
            if (back > t) continue;
            const T* xrow = xd + (b * steps + t - back) * cin;
            T* aj = acc.data() + j * cin * cout;
            for (std::size_t i = 0; i < cin; ++i) {
              const T xv_i = xrow[i];
              T* arow = aj + i * cout;
              for (std::size_t o = 0; o < cout; ++o) arow[o] += xv_i * grow[o];
            }
          }
        }
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t i = 0; i < cin; ++i)
          for (std::size_t j = 0; j < k; ++j) gw->at(o, i, j) += acc[(j * cin + i) * cout + o];
    }
    if (Tensor<T>* gx = tp.grad_slot(x)) {
      const auto wt = taps_out_in(tp.value(weights), spec);
      T* gxd = gx->data().data();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < steps; ++t) {
          const T* grow = g + (b * steps + t) * cout;
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t back = (k - 1 - j) * spec.dilation;
            if (back > t) continue;
            T* dxrow = gxd + (b * steps + t - back) * cin;
            const T* wj = wt.data() + j * cout * cin;
            for (std::size_t o = 0; o < cout; ++o) {
              const T go = grow[o];
              const T* wrow = wj + o * cin;
              for (std::size_t i = 0; i < cin; ++i) dxrow[i] += wrow[i] * go;
            }
          }
        }
    }
  };
  if (bias) return tape.record(std::move(y), {x, weights, *bias}, backward);
  return tape.record(std::move(y), {x, weights}, backward);
}

template <typename T>
Var weight_norm(Tape<T>& tape, Var direction, Var gain) {
  Tensor<T> w = weight_normalized_weights(tape.value(direction), tape.value(gain));
  return tape.record(std::move(w), {direction, gain}, [direction, gain](Tape<T>& tp, const Tensor<T>& gw) {
    const Tensor<T>& v = tp.value(direction);
    const Tensor<T>& g = tp.value(gain);
    const std::size_t filters = v.dim(0), slice = v.size() / filters;
    Tensor<T>* gv = tp.grad_slot(direction);
    Tensor<T>* gg = tp.grad_slot(gain);
    for (std::size_t o = 0; o < filters; ++o) {
      const T* vo = v.data().data() + o * slice;
      const T* go = gw.data().data() + o * slice;
      T sq = 0, dot = 0;
      for (std::size_t i = 0; i < slice; ++i) {
        sq += vo[i] * vo[i];
        dot += go[i] * vo[i];
      }
      const T norm = std::sqrt(sq);
      const T proj = dot / norm;  // <grad, unit direction>
      if (gg) (*gg)[o] += proj;
      if (gv) {
        const T scale = g[o] / norm;
        for (std::size_t i = 0; i < slice; ++i)
          (*gv)[o * slice + i] += scale * (go[i] - proj * vo[i] / norm);
      }
    }
  });
}

template <typename T>
Var swish(Tape<T>& tape, Var x) {
  return tape.record(swish(tape.value(x)), {x}, [x](Tape<T>& tp, const Tensor<T>& gy) {
    const Tensor<T>& xv = tp.value(x);
    Tensor<T>* gx = tp.grad_slot(x);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const T s = sigmoid(xv[i]);
      (*gx)[i] += gy[i] * (s + xv[i] * s * (T{1} - s));
    }
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  return tape.record(relu(tape.value(x)), {x}, [x](Tape<T>& tp, const Tensor<T>& gy) {
    const Tensor<T>& xv = tp.value(x);
    Tensor<T>* gx = tp.grad_slot(x);
    for (std::size_t i = 0; i < xv.size(); ++i)
      if (xv[i] > 0) (*gx)[i] += gy[i];
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.value(a), tape.value(b), "add");
  Tensor<T> y = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return tape.record(std::move(y), {a, b}, [a, b](Tape<T>& tp, const Tensor<T>& gy) {
    for (Var v : {a, b})
      if (Tensor<T>* g = tp.grad_slot(v))
        for (std::size_t i = 0; i < gy.size(); ++i) (*g)[i] += gy[i];
  });
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.value(a), tape.value(b), "mul");
  Tensor<T> y = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return tape.record(std::move(y), {a, b}, [a, b](Tape<T>& tp, const Tensor<T>& gy) {
    const Tensor<T>& av = tp.value(a);
    const Tensor<T>& bv2 = tp.value(b);
    if (Tensor<T>* ga = tp.grad_slot(a))
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * bv2[i];
    if (Tensor<T>* gb = tp.grad_slot(b))
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * av[i];
  });
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  T total = 0;
  for (T v : tape.value(x).data()) total += v;
  return tape.record(Tensor<T>::scalar(total), {x}, [x](Tape<T>& tp, const Tensor<T>& gy) {
    Tensor<T>* gx = tp.grad_slot(x);
    for (auto& v : gx->data()) v += gy[0];
  });
}

template <typename T>
Var layer_norm(Tape<T>& tape, Var x, Var gamma, Var beta, double eps) {
  Tensor<T> y = layer_norm(tape.value(x), tape.value(gamma), tape.value(beta), eps);
  return tape.record(std::move(y), {x, gamma, beta}, [x, gamma, beta, eps](Tape<T>& tp, const Tensor<T>& gy) {
    const Tensor<T>& xv = tp.value(x);
    const Tensor<T>& gm = tp.value(gamma);
    const std::size_t c = xv.shape().back(), rows = xv.size() / c;
    Tensor<T>* gx = tp.grad_slot(x);
    Tensor<T>* gg = tp.grad_slot(gamma);
    Tensor<T>* gb = tp.grad_slot(beta);
    std::vector<T> xhat(c), dxhat(c);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* xr = xv.data().data() + r * c;
      const T* gr = gy.data().data() + r * c;
      T mean = 0;
      for (std::size_t i = 0; i < c; ++i) mean += xr[i];
      mean /= static_cast<T>(c);
      T var = 0;
      for (std::size_t i = 0; i < c; ++i) var += (xr[i] - mean) * (xr[i] - mean);
      var /= static_cast<T>(c);
      const T inv = T{1} / std::sqrt(var + static_cast<T>(eps));
      T mean_d = 0, mean_dx = 0;
      for (std::size_t i = 0; i < c; ++i) {
        xhat[i] = (xr[i] - mean) * inv;
        dxhat[i] = gr[i] * gm[i];
        mean_d += dxhat[i];
        mean_dx += dxhat[i] * xhat[i];
        if (gg) (*gg)[i] += gr[i] * xhat[i];
        if (gb) (*gb)[i] += gr[i];
      }
      mean_d /= static_cast<T>(c);
      mean_dx /= static_cast<T>(c);
      if (gx)
        for (std::size_t i = 0; i < c; ++i)
          (*gx)[r * c + i] += inv * (dxhat[i] - mean_d - xhat[i] * mean_dx);
    }
  });
}

template <typename T>
Var dropout(Tape<T>& tape, Var x, double rate, bool training, Rng& rng) {
  check_rate(rate);
  if (!training || rate == 0.0) return x;
  Tensor<T> mask = dropout_mask<T>(tape.value(x).shape(), rate, rng);
  Tensor<T> y = tape.value(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return tape.record(std::move(y), {x}, [x, mask = std::move(mask)](Tape<T>& tp, const Tensor<T>& gy) {
    Tensor<T>* gx = tp.grad_slot(x);
    for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i] * mask[i];
  });
}

template <typename T>
Var global_average_pool(Tape<T>& tape, Var x) {
  return tape.record(global_average_pool(tape.value(x)), {x}, [x](Tape<T>& tp, const Tensor<T>& gy) {
    const Tensor<T>& xv = tp.value(x);
    const std::size_t batch = xv.dim(0), steps = xv.dim(1), c = xv.dim(2);
    Tensor<T>* gx = tp.grad_slot(x);
    const T scale = T{1} / static_cast<T>(steps);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t i = 0; i < c; ++i) gx->at(b, t, i) += gy.at(b, i) * scale;
  });
}

template <typename T>
Var softmax(Tape<T>& tape, Var x) {
  Tensor<T> y = softmax(tape.value(x));
  Tensor<T> saved = y;
  return tape.record(std::move(y), {x}, [x, saved = std::move(saved)](Tape<T>& tp, const Tensor<T>& gy) {
    const std::size_t c = saved.shape().back(), rows = saved.size() / c;
    Tensor<T>* gx = tp.grad_slot(x);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t i = 0; i < c; ++i) dot += gy[r * c + i] * saved[r * c + i];
      for (std::size_t i = 0; i < c; ++i)
        (*gx)[r * c + i] += saved[r * c + i] * (gy[r * c + i] - dot);
    }
  });
}

#define SEQCLS_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> causal_dilated_conv1d(const Tensor<T>&, const ConvSpec&, const Tensor<T>&,     \
                                           const Tensor<T>*);                                       \
  template Tensor<T> swish(const Tensor<T>&);                                                       \
  template Tensor<T> relu(const Tensor<T>&);                                                        \
  template Tensor<T> weight_normalized_weights(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);      \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng&);                                 \
  template Tensor<T> global_average_pool(const Tensor<T>&);                                         \
  template Tensor<T> softmax(const Tensor<T>&);                                                     \
  template Var conv1d(Tape<T>&, Var, Var, std::optional<Var>, const ConvSpec&);                     \
  template Var weight_norm(Tape<T>&, Var, Var);                                                     \
  template Var swish(Tape<T>&, Var);                                                                \
  template Var relu(Tape<T>&, Var);                                                                 \
  template Var add(Tape<T>&, Var, Var);                                                             \
  template Var mul(Tape<T>&, Var, Var);                                                             \
  template Var sum(Tape<T>&, Var);                                                                  \
  template Var layer_norm(Tape<T>&, Var, Var, Var, double);                                         \
  template Var dropout(Tape<T>&, Var, double, bool, Rng&);                                          \
  template Var global_average_pool(Tape<T>&, Var);                                                  \
  template Var softmax(Tape<T>&, Var);

SEQCLS_INSTANTIATE_OPS(float)
SEQCLS_INSTANTIATE_OPS(double)

#undef SEQCLS_INSTANTIATE_OPS

}  // namespace ops
}  // namespace seqcls
