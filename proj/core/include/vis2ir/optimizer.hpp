#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vis2ir/layers.hpp"

namespace vis2ir {

enum class OptimizerKind { adam, sgd };

OptimizerKind parse_optimizer_kind(const std::string& s);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// Per-parameter optimizer state, exposed for checkpointing.
struct ParameterSlot {
  Tensor first_moment;
  Tensor second_moment;
  std::int64_t steps = 0;
};

/// Adam or plain SGD over a fixed parameter list. A parameter without an accumulated
/// gradient is left untouched by `step()`, including its moments and step count.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(ParameterList params, OptimizerConfig config);

  void step();
  void zero_grad();

  const ParameterList& parameters() const { return params_; }
  const OptimizerConfig& config() const { return config_; }
  std::vector<ParameterSlot>& slots() { return slots_; }
  const std::vector<ParameterSlot>& slots() const { return slots_; }

 private:
  ParameterList params_;
  OptimizerConfig config_;
  std::vector<ParameterSlot> slots_;
};

}  // namespace vis2ir
