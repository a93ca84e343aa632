// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major float64 tensors with reverse-mode differentiation.
//
// A Tensor is a shared handle: copies alias the same storage, like a
// framework tensor. Every differentiable op attaches a node to its result
// that remembers its inputs and a backward rule; the recorded graph is the
// computation tape. backward() walks it once in reverse topological order
// and marks every node consumed, so the same forward graph cannot be
// differentiated twice.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ltrans {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorImpl;

using BackwardFn =
    std::function<void(std::span<const double> out_grad, std::vector<std::vector<double>>& in_grads)>;

struct Node {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  /// Accumulates into in_grads[i] for every input whose buffer is non-empty.
  BackwardFn backward;
  bool consumed = false;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until a backward pass reaches this leaf
  std::shared_ptr<Node> node;

  bool tracked() const { return requires_grad || node != nullptr; }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  /// Builds a rows x cols matrix from nested initializer lists.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  /// Leading extent (1 for a rank-0 tensor).
  std::size_t rows() const;
  /// numel() / rows().
  std::size_t cols() const;

  std::span<const double> data() const;
  /// Direct write access; bypasses the tape. Used by optimizers and loaders.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const { return data().subspan(r * cols(), cols()); }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  /// Gradient as a fresh tensor; zeros when no gradient has been accumulated.
  Tensor grad_tensor() const;
  void zero_grad();

  /// Copy of the values with no graph and requires_grad = false.
  Tensor detach() const;
  /// Copy of the selected rows, without graph.
  Tensor select_rows(std::span<const std::size_t> indices) const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  const detail::TensorImpl& checked() const;
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Whether ops record nodes on the current thread.
bool grad_enabled() noexcept;

/// Disables recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Re-enables recording on the current thread for its lifetime, e.g. for
/// the sampler's input gradients inside an outer NoGradGuard.
class EnableGradGuard {
 public:
  EnableGradGuard();
  ~EnableGradGuard();
  EnableGradGuard(const EnableGradGuard&) = delete;
  EnableGradGuard& operator=(const EnableGradGuard&) = delete;

 private:
  bool previous_;
};

/// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
/// `loss`, which must hold exactly one element. Consumes the graph.
void backward(const Tensor& loss);

/// Returns d(output)/d(input) for each listed tensor without touching any
/// leaf's grad buffer. Unreached inputs get zeros. Consumes the graph.
std::vector<Tensor> gradients(const Tensor& output, std::span<const Tensor> inputs);

struct TapeEntry {
  std::string op;
  /// Positions of node inputs within the tape; leaves are not listed.
  std::vector<std::size_t> node_inputs;
  std::size_t leaf_inputs = 0;
};

/// The recorded ops reachable from `root`, in the order backward would
/// replay them reversed (inputs always precede their consumers).
std::vector<TapeEntry> record_tape(const Tensor& root);

/// Creates an op result. When grad recording is on and any input is
/// tracked, a node with `backward` is attached.
Tensor make_op_result(Shape shape, std::vector<double> data, const char* op,
                      std::initializer_list<Tensor> inputs, detail::BackwardFn backward);

}  // namespace ltrans
