#include "vis2ir/optimizer.hpp"

#include <cmath>

#include "vis2ir/error.hpp"

namespace vis2ir {

OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("train.optimizer", "expected adam or sgd, got '" + s + "'");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

Optimizer::Optimizer(ParameterList params, OptimizerConfig config) : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0)) throw ConfigError("lr", "learning rate must be > 0");
  slots_.reserve(params_.size());
  for (const auto& p : params_) {
    const Shape s = config_.kind == OptimizerKind::adam ? p.var.shape() : Shape{};
    slots_.push_back({Tensor(s), Tensor(s), 0});
  }
}

void Optimizer::step() {
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Var& var = params_[k].var;
    if (!var.has_grad()) continue;
    Tensor& value = var.mutable_value();
    const Tensor& g = var.grad_buffer();
    ParameterSlot& slot = slots_[k];
    ++slot.steps;
    if (config_.kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < value.numel(); ++i) value[i] -= config_.lr * g[i];
      continue;
    }
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(slot.steps));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(slot.steps));
    for (std::size_t i = 0; i < value.numel(); ++i) {
      slot.first_moment[i] = b1 * slot.first_moment[i] + (1.0 - b1) * g[i];
      slot.second_moment[i] = b2 * slot.second_moment[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = slot.first_moment[i] / c1;
      const double v_hat = slot.second_moment[i] / c2;
      value[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

}  // namespace vis2ir
