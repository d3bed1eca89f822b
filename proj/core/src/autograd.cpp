#include "vis2ir/autograd.hpp"

#include <unordered_set>
#include <utility>

#include "vis2ir/error.hpp"

namespace vis2ir {

namespace {
thread_local bool g_grad_enabled = true;
}

struct Var::Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<Var> inputs;
  BackwardFn backward;
};

Var Var::leaf(Tensor value, bool requires_grad) {
  Var v;
  v.node_ = std::make_shared<Node>();
  v.node_->value = std::move(value);
  v.node_->requires_grad = requires_grad;
  return v;
}

Var Var::from_op(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  bool any = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) any = any || in.requires_grad();
  }
  Var v = leaf(std::move(value), any);
  if (any) {
    v.node_->inputs = std::move(inputs);
    v.node_->backward = std::move(backward);
  }
  return v;
}

const Tensor& Var::value() const {
  if (!node_) throw PreconditionError("use of an empty Var");
  return node_->value;
}

Tensor& Var::mutable_value() {
  if (!node_) throw PreconditionError("use of an empty Var");
  return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

bool Var::has_grad() const { return node_ && !node_->grad.empty(); }

Tensor Var::grad() const {
  if (has_grad()) return node_->grad;
  return Tensor(value().shape());
}

Tensor& Var::grad_buffer() {
  if (!node_) throw PreconditionError("use of an empty Var");
  if (node_->grad.empty()) node_->grad = Tensor(node_->value.shape());
  return node_->grad;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

void backward(const Var& root) {
  if (!root.node_) throw PreconditionError("backward on an empty Var");
  if (root.value().numel() != 1) {
    throw PreconditionError("backward needs a scalar root, got " + to_string(root.shape()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order with inputs before consumers.
  std::vector<Var::Node*> order;
  std::unordered_set<Var::Node*> visited;
  std::vector<std::pair<Var::Node*, std::size_t>> stack;
  stack.emplace_back(root.node_.get(), 0);
  visited.insert(root.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Var::Node* child = node->inputs[next++].node_.get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  Var::Node* r = root.node_.get();
  if (r->grad.empty()) r->grad = Tensor(r->value.shape());
  r->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Var::Node* node = *it;
    if (!node->backward || node->grad.empty()) continue;
    node->backward(node->value, node->grad, node->inputs);
  }
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace vis2ir
