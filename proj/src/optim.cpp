// SPDX-License-Identifier: Apache-2.0
#include "ltrans/optim.hpp"

#include <cmath>

#include "ltrans/errors.hpp"

namespace ltrans {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ContractError("unknown optimizer '" + name + "'");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw ContractError("learning rate must be positive");
}

void Optimizer::step(std::span<Tensor> params) {
  for (const Tensor& p : params) {
    if (!p.has_grad()) throw ContractError("optimizer step on a parameter without a gradient");
  }
  const double lr = config_.learning_rate;
  ++steps_;
  if (config_.kind == OptimizerKind::sgd) {
    for (Tensor& p : params) {
      auto values = p.mutable_data();
      const auto g = p.grad();
      for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * g[i];
    }
    return;
  }

  if (m_.empty()) {
    for (const Tensor& p : params) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ContractError("optimizer parameter list changed between steps");
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    const auto g = params[k].grad();
    if (m_[k].size() != values.size()) throw ContractError("optimizer parameter shape changed between steps");
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

void zero_grads(std::span<Tensor> params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace ltrans
