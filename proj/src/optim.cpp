#include "seqcls/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace seqcls {

std::vector<double> class_weights_inverse_frequency(std::span<const std::size_t> counts) {
  if (counts.empty()) throw ConfigError("class weights need at least one class");
  double total = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0)
      throw ConfigError("class " + std::to_string(c) +
                        " has no samples; merge or drop it before deriving weights");
    total += static_cast<double>(counts[c]);
  }
  std::vector<double> w(counts.size());
  const double classes = static_cast<double>(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) w[c] = total / (classes * static_cast<double>(counts[c]));
  return w;
}

void FocalLossConfig::validate(std::size_t num_classes) const {
  if (!(gamma >= 0)) throw ConfigError("focal gamma must be >= 0");
  if (alpha.size() != num_classes)
    throw ConfigError("focal alpha has " + std::to_string(alpha.size()) + " entries for " +
                      std::to_string(num_classes) + " classes");
  for (double a : alpha)
    if (!(a > 0)) throw ConfigError("focal alpha entries must be positive");
  if (!(epsilon > 0)) throw ConfigError("focal epsilon must be positive");
}

double focal_term(double p, double alpha, double gamma, double epsilon) {
  const double modulator = gamma == 0.0 ? 1.0 : std::pow(std::max(0.0, 1.0 - p), gamma);
  return -alpha * modulator * std::log(std::max(p, epsilon));
}

namespace {

template <typename T>
void check_labels(const Tensor<T>& probs, std::span<const int> labels, const FocalLossConfig& config) {
  require_rank(probs, 2, "focal loss probabilities");
  const std::size_t classes = probs.dim(1);
  config.validate(classes);
  if (labels.size() != probs.dim(0))
    throw InputError("focal loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(probs.dim(0)) + " rows");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw InputError("focal loss: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(classes) + ")");
}

// d/dp of the focal term.
double focal_term_derivative(double p, double alpha, double gamma, double epsilon) {
  const double lp = std::log(std::max(p, epsilon));
  const double dlp = p >= epsilon ? 1.0 / p : 0.0;
  const double q = std::max(0.0, 1.0 - p);
  if (gamma == 0.0) return -alpha * dlp;
  const double mod = std::pow(q, gamma);
  const double dmod = q > 0.0 ? -gamma * std::pow(q, gamma - 1.0) : 0.0;
  return -alpha * (dmod * lp + mod * dlp);
}

}  // namespace

template <typename T>
double focal_loss(const Tensor<T>& probs, std::span<const int> labels, const FocalLossConfig& config) {
  check_labels(probs, labels, config);
  const std::size_t classes = probs.dim(1);
  double total = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const int y = labels[b];
    total += focal_term(static_cast<double>(probs[b * classes + y]), config.alpha[y], config.gamma,
                        config.epsilon);
  }
  return total / static_cast<double>(labels.size());
}

namespace ops {

template <typename T>
Var focal_loss(Tape<T>& tape, Var probs, std::span<const int> labels, const FocalLossConfig& config) {
  const double loss = seqcls::focal_loss(tape.value(probs), labels, config);
  std::vector<int> ys(labels.begin(), labels.end());
  return tape.record(Tensor<T>::scalar(static_cast<T>(loss)), {probs},
                     [probs, ys = std::move(ys), config](Tape<T>& tp, const Tensor<T>& gy) {
                       const Tensor<T>& p = tp.value(probs);
                       const std::size_t classes = p.dim(1);
                       Tensor<T>* gp = tp.grad_slot(probs);
                       const double scale = static_cast<double>(gy[0]) / static_cast<double>(ys.size());
                       for (std::size_t b = 0; b < ys.size(); ++b) {
                         const int y = ys[b];
                         const double d = focal_term_derivative(static_cast<double>(p[b * classes + y]),
                                                                config.alpha[y], config.gamma,
                                                                config.epsilon);
                         (*gp)[b * classes + y] += static_cast<T>(scale * d);
                       }
                     });
}

}  // namespace ops

bool is_l2_regularized(const std::string& name) {
  auto ends_with = [&](const std::string& suffix) {
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with(".weight") || ends_with(".direction");
}

template <typename T>
void adam_step(AdamState<T>& state, ParameterStore<T>& params, const GradientMap<T>& grads) {
  for (const auto& [name, p] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ContractError("no gradient for parameter '" + name + "'");
    if (it->second.shape() != p.shape())
      throw ContractError("gradient shape mismatch for parameter '" + name + "'");
    if (!it->second.all_finite()) throw NumericalError("non-finite gradient for parameter '" + name + "'");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, p] : params) {
    const Tensor<T>& g = grads.at(name);
    auto& m = state.first_moment.try_emplace(name, p.shape()).first->second;
    auto& v = state.second_moment.try_emplace(name, p.shape()).first->second;
    const double l2 = is_l2_regularized(name) ? state.l2_lambda : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]) + l2 * static_cast<double>(p[i]);
      const double mi = state.beta1 * static_cast<double>(m[i]) + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * static_cast<double>(v[i]) + (1.0 - state.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = state.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + state.eps);
      p[i] = static_cast<T>(static_cast<double>(p[i]) - update);
    }
  }
}

template <typename T>
GradientMap<T> accumulate_gradients(std::span<const GradientMap<T>> micro_grads) {
  if (micro_grads.empty()) throw ContractError("accumulate_gradients needs at least one map");
  GradientMap<T> out = micro_grads.front();
  for (std::size_t k = 1; k < micro_grads.size(); ++k) {
    const auto& other = micro_grads[k];
    if (other.size() != out.size()) throw ContractError("gradient maps have different key sets");
    for (auto& [name, g] : out) {
      auto it = other.find(name);
      if (it == other.end()) throw ContractError("gradient map missing key '" + name + "'");
      if (it->second.shape() != g.shape())
        throw ContractError("gradient shape mismatch for '" + name + "'");
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += it->second[i];
    }
  }
  const T inv = T{1} / static_cast<T>(micro_grads.size());
  for (auto& [name, g] : out)
    for (auto& v : g.data()) v *= inv;
  return out;
}

template double focal_loss(const Tensor<float>&, std::span<const int>, const FocalLossConfig&);
template double focal_loss(const Tensor<double>&, std::span<const int>, const FocalLossConfig&);
template Var ops::focal_loss(Tape<float>&, Var, std::span<const int>, const FocalLossConfig&);
template Var ops::focal_loss(Tape<double>&, Var, std::span<const int>, const FocalLossConfig&);
template void adam_step(AdamState<float>&, ParameterStore<float>&, const GradientMap<float>&);
template void adam_step(AdamState<double>&, ParameterStore<double>&, const GradientMap<double>&);
template GradientMap<float> accumulate_gradients(std::span<const GradientMap<float>>);
template GradientMap<double> accumulate_gradients(std::span<const GradientMap<double>>);

}  // namespace seqcls
