// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ltrans/tensor.hpp"

namespace ltrans {

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  /// Applies one update using each parameter's accumulated gradient.
  /// Throws ContractError if a parameter has no gradient or the parameter
  /// list changed shape since the previous step.
  void step(std::span<Tensor> params);

  const OptimizerConfig& config() const { return config_; }
  std::uint64_t step_count() const { return steps_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

void zero_grads(std::span<Tensor> params);

}  // namespace ltrans
