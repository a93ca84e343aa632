// SPDX-License-Identifier: Apache-2.0
#include "ltrans/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ltrans/errors.hpp"

namespace ltrans {

using detail::Node;
using detail::TensorImpl;

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  if (numel_of(shape) != data.size()) {
    throw DimensionError("shape " + shape_string(shape) + " needs " + std::to_string(numel_of(shape)) +
                         " values, got " + std::to_string(data.size()));
  }
  impl_ = std::make_shared<TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = numel_of(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = numel_of(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> values;
  std::size_t width = 0;
  for (const auto& r : rows) {
    if (width == 0) width = r.size();
    if (r.size() != width) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), width}, std::move(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

const TensorImpl& Tensor::checked() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return checked().shape; }
std::size_t Tensor::numel() const { return checked().data.size(); }
std::size_t Tensor::rows() const { return shape().empty() ? 1 : shape()[0]; }
std::size_t Tensor::cols() const { return numel() / rows(); }
std::span<const double> Tensor::data() const { return checked().data; }

std::span<double> Tensor::mutable_data() {
  checked();
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on a tensor of shape " + shape_string(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  checked();
  if (impl_->node) throw ContractError("requires_grad can only be set on leaf tensors");
  impl_->requires_grad = value;
  if (!value) impl_->grad.clear();
  return *this;
}

bool Tensor::is_leaf() const { return checked().node == nullptr; }
bool Tensor::has_grad() const { return !checked().grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient");
  return impl_->grad;
}

Tensor Tensor::grad_tensor() const {
  const auto& impl = checked();
  if (impl.grad.empty()) return Tensor::zeros(impl.shape);
  return Tensor(impl.shape, impl.grad);
}

void Tensor::zero_grad() {
  checked();
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& impl = checked();
  return Tensor(impl.shape, impl.data);
}

Tensor Tensor::select_rows(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ContractError("select_rows needs at least one index");
  const std::size_t width = cols();
  std::vector<double> out;
  out.reserve(indices.size() * width);
  for (std::size_t idx : indices) {
    if (idx >= rows()) throw DimensionError("row index out of range");
    const auto r = row(idx);
    out.insert(out.end(), r.begin(), r.end());
  }
  Shape shape = this->shape();
  if (shape.empty()) shape = {1};
  shape[0] = indices.size();
  return Tensor(std::move(shape), std::move(out));
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

EnableGradGuard::EnableGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = true; }
EnableGradGuard::~EnableGradGuard() { g_grad_enabled = previous_; }

Tensor make_op_result(Shape shape, std::vector<double> data, const char* op,
                      std::initializer_list<Tensor> inputs, detail::BackwardFn backward) {
  Tensor out(std::move(shape), std::move(data));
  if (!g_grad_enabled) return out;
  bool any_tracked = false;
  for (const Tensor& in : inputs) any_tracked = any_tracked || in.impl()->tracked();
  if (!any_tracked) return out;
  auto node = std::make_shared<Node>();
  node->op = op;
  for (const Tensor& in : inputs) node->inputs.push_back(in.impl());
  node->backward = std::move(backward);
  out.impl()->node = std::move(node);
  return out;
}

namespace {

// Iterative post-order DFS: every impl appears after all of its tracked inputs.
std::vector<TensorImpl*> topological_order(TensorImpl* root) {
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    Node* node = impl->node.get();
    if (node && node->consumed) {
      throw ContractError("graph through op '" + node->op + "' was already consumed by a backward pass");
    }
    if (node && next < node->inputs.size()) {
      TensorImpl* child = node->inputs[next++].get();
      if (child->tracked() && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(impl);
    stack.pop_back();
  }
  return order;
}

// Runs the reverse sweep. With `targets` empty, every tracked input is
// differentiated; otherwise only impls that reach a target are.
std::unordered_map<TensorImpl*, std::vector<double>> reverse_sweep(
    const Tensor& output, const std::unordered_set<TensorImpl*>& targets) {
  TensorImpl* root = output.impl().get();
  std::unordered_map<TensorImpl*, std::vector<double>> adjoint;
  if (!root->tracked()) return adjoint;

  const auto order = topological_order(root);

  std::unordered_set<TensorImpl*> relevant;
  for (TensorImpl* impl : order) {
    bool keep = targets.empty() || targets.count(impl) > 0;
    if (!keep && impl->node) {
      for (const auto& in : impl->node->inputs) keep = keep || relevant.count(in.get()) > 0;
    }
    if (keep) relevant.insert(impl);
  }

  adjoint[root] = std::vector<double>(root->data.size(), 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* impl = *it;
    Node* node = impl->node.get();
    if (!node || !relevant.count(impl)) continue;
    auto found = adjoint.find(impl);
    if (found == adjoint.end()) continue;

    std::vector<std::vector<double>> in_grads(node->inputs.size());
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      TensorImpl* in = node->inputs[i].get();
      if (in->tracked() && relevant.count(in)) in_grads[i].assign(in->data.size(), 0.0);
    }
    node->backward(found->second, in_grads);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      if (in_grads[i].empty()) continue;
      auto& acc = adjoint[node->inputs[i].get()];
      if (acc.empty()) {
        acc = std::move(in_grads[i]);
      } else {
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += in_grads[i][j];
      }
    }
    if (impl != root) adjoint.erase(impl);
  }

  for (TensorImpl* impl : order) {
    if (!impl->node) continue;
    impl->node->consumed = true;
    impl->node->backward = nullptr;
    impl->node->inputs.clear();
  }
  return adjoint;
}

}  // namespace

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward on an undefined tensor");
  if (loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  auto adjoint = reverse_sweep(loss, {});
  for (auto& [impl, g] : adjoint) {
    if (impl->node || !impl->requires_grad) continue;
    if (impl->grad.empty()) {
      impl->grad = std::move(g);
    } else {
      for (std::size_t j = 0; j < g.size(); ++j) impl->grad[j] += g[j];
    }
  }
}

std::vector<Tensor> gradients(const Tensor& output, std::span<const Tensor> inputs) {
  if (!output.defined()) throw ContractError("gradients of an undefined tensor");
  if (output.numel() != 1) {
    throw ContractError("gradients needs a scalar output, got shape " + shape_string(output.shape()));
  }
  std::unordered_set<TensorImpl*> targets;
  for (const Tensor& in : inputs) targets.insert(in.impl().get());
  auto adjoint = reverse_sweep(output, targets);
  std::vector<Tensor> result;
  result.reserve(inputs.size());
  for (const Tensor& in : inputs) {
    auto found = adjoint.find(in.impl().get());
    if (found == adjoint.end()) {
      result.push_back(Tensor::zeros(in.shape()));
    } else {
      result.emplace_back(in.shape(), found->second);
    }
  }
  return result;
}

std::vector<TapeEntry> record_tape(const Tensor& root) {
  std::vector<TapeEntry> tape;
  if (!root.defined() || !root.impl()->tracked()) return tape;
  const auto order = topological_order(root.impl().get());
  std::unordered_map<TensorImpl*, std::size_t> position;
  for (TensorImpl* impl : order) {
    if (!impl->node) continue;
    TapeEntry entry;
    entry.op = impl->node->op;
    for (const auto& in : impl->node->inputs) {
      auto found = position.find(in.get());
      if (found != position.end()) {
        entry.node_inputs.push_back(found->second);
      } else {
        ++entry.leaf_inputs;
      }
    }
    position[impl] = tape.size();
    tape.push_back(std::move(entry));
  }
  return tape;
}

}  // namespace ltrans
