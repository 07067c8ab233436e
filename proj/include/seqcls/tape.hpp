#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "seqcls/errors.hpp"
#include "seqcls/tensor.hpp"

namespace seqcls {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

template <typename T>
using GradientMap = std::map<std::string, Tensor<T>>;

/// Named trainable parameters; std::map keeps iteration order deterministic.
template <typename T>
using ParameterStore = std::map<std::string, Tensor<T>>;

/// Reverse-mode autodiff record.
///
/// Values are appended in execution order, so every node's inputs precede it.
/// A Tape is single-owner: one training step builds it, calls backward() once
/// and discards it.
template <typename T>
class Tape {
 public:
  /// Called during backward() with the gradient of the node's output. The
  /// closure pulls input values via value() and accumulates into grad_slot().
  using Backward = std::function<void(Tape&, const Tensor<T>& grad_out)>;

  Var constant(Tensor<T> value) { return push(std::move(value), false); }

  Var parameter(Tensor<T> value) { return push(std::move(value), true); }

  /// Records an op output. The backward closure is dropped when no input
  /// needs a gradient.
  Var record(Tensor<T> output, std::initializer_list<Var> inputs, Backward backward) {
    bool needs = false;
    for (auto in : inputs) needs = needs || requires_grad_.at(in.id);
    Var out = push(std::move(output), needs);
    if (needs) nodes_.push_back({out.id, std::move(backward)});
    return out;
  }

  const Tensor<T>& value(Var v) const { return values_.at(v.id); }
  bool requires_grad(Var v) const { return requires_grad_.at(v.id); }
  std::size_t size() const { return values_.size(); }
  std::size_t node_count() const { return nodes_.size(); }

  /// Gradient accumulator for `v`, zero-initialized on first use; nullptr when
  /// `v` does not participate in differentiation. Only valid inside backward().
  Tensor<T>* grad_slot(Var v) {
    if (!requires_grad_.at(v.id)) return nullptr;
    auto& g = grads_.at(v.id);
    if (g.empty()) g = Tensor<T>(values_[v.id].shape());
    return &g;
  }

  void backward(Var loss) {
    if (value(loss).size() != 1)
      throw ContractError("backward() requires a scalar loss, got shape " +
                          shape_string(value(loss).shape()));
    grads_.assign(values_.size(), Tensor<T>{});
    if (!requires_grad_[loss.id]) return;
    grads_[loss.id] = Tensor<T>(value(loss).shape(), T{1});
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->output > loss.id) continue;
      const Tensor<T>& g = grads_[it->output];
      if (g.empty()) continue;
      it->backward(*this, g);
    }
    backward_done_ = true;
  }

  /// Gradient of the last backward() loss with respect to `v` (zeros when
  /// `v` did not influence the loss).
  Tensor<T> grad(Var v) const {
    if (!backward_done_) throw ContractError("grad() called before backward()");
    const auto& g = grads_.at(v.id);
    return g.empty() ? Tensor<T>(values_.at(v.id).shape()) : g;
  }

 private:
  struct Node {
    std::size_t output;
    Backward backward;
  };

  Var push(Tensor<T> value, bool requires_grad) {
    values_.push_back(std::move(value));
    requires_grad_.push_back(requires_grad);
    return Var{values_.size() - 1};
  }

  std::vector<Tensor<T>> values_;
  std::vector<bool> requires_grad_;
  std::vector<Tensor<T>> grads_;
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace seqcls
