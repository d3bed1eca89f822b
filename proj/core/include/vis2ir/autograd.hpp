#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vis2ir/tensor.hpp"

namespace vis2ir {

/// Handle to a node in a dynamically built reverse-mode graph.
///
/// Leaves are created with `Var::leaf` (parameters, inputs under test) or `Var::constant`.
/// Every op in ops.hpp returns a new Var whose node remembers its inputs when gradient
/// recording is enabled and at least one input requires a gradient. The graph lives as
/// long as the result Var does; parameters outlive any single graph.
class Var {
 public:
  /// Receives the output node's value and gradient; must accumulate into
  /// `inputs[i].grad_buffer()` for each input that `requires_grad()`.
  using BackwardFn = std::function<void(const Tensor& out, const Tensor& grad_out, std::vector<Var>& inputs)>;

  Var() = default;

  static Var leaf(Tensor value, bool requires_grad = true);
  static Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Builds a result node. When recording is off or no input requires a gradient the
  /// inputs and backward function are dropped.
  static Var from_op(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  explicit operator bool() const noexcept { return static_cast<bool>(node_); }

  const Tensor& value() const;
  /// In-place access for optimizers. Only meaningful on leaves.
  Tensor& mutable_value();
  const Shape& shape() const { return value().shape(); }

  bool requires_grad() const;
  bool has_grad() const;
  /// Gradient accumulated by the last backward pass; zeros if none was recorded.
  Tensor grad() const;
  /// Zero-initialised on first access.
  Tensor& grad_buffer();
  void zero_grad();

  /// Same value, cut from the graph.
  Var detach() const { return constant(value()); }

  /// Identity of the underlying node (stable across copies of the handle).
  const void* id() const noexcept { return node_.get(); }

 private:
  struct Node;
  std::shared_ptr<Node> node_;

  friend void backward(const Var& root);
};

/// Seeds d(root)/d(root) = 1 and propagates to every reachable node. `root` must be a scalar.
void backward(const Var& root);

bool grad_enabled() noexcept;

/// Disables graph recording on the current thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace vis2ir
