// SPDX-License-Identifier: Apache-2.0
#include "ltrans/ops.hpp"

#include <cmath>
#include <memory>

#include "ltrans/errors.hpp"
#include "ltrans/kernels.hpp"

namespace ltrans {

namespace {

using Impl = std::shared_ptr<detail::TensorImpl>;
using Grads = std::vector<std::vector<double>>;

enum class Broadcast { none, left_scalar, right_scalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (b.numel() == 1) return Broadcast::right_scalar;
  if (a.numel() == 1) return Broadcast::left_scalar;
  throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()) + " are not broadcast-compatible");
}

// Shared driver for the four binary elementwise ops. `f` computes the value,
// `da`/`db` the partial derivatives at (x, y).
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, DA da, DB db) {
  const Broadcast kind = broadcast_kind(a, b, op);
  const Shape& shape = kind == Broadcast::left_scalar ? b.shape() : a.shape();
  const std::size_t n = numel_of(shape);
  const auto av = a.data();
  const auto bv = b.data();
  auto lhs = [&](std::size_t i) { return kind == Broadcast::left_scalar ? av[0] : av[i]; };
  auto rhs = [&](std::size_t i) { return kind == Broadcast::right_scalar ? bv[0] : bv[i]; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(lhs(i), rhs(i));

  Impl ia = a.impl();
  Impl ib = b.impl();
  return make_op_result(shape, std::move(out), op, {a, b},
                        [ia, ib, kind, n, da, db](std::span<const double> g, Grads& in) {
                          const auto& x = ia->data;
                          const auto& y = ib->data;
                          for (std::size_t i = 0; i < n; ++i) {
                            const double xi = kind == Broadcast::left_scalar ? x[0] : x[i];
                            const double yi = kind == Broadcast::right_scalar ? y[0] : y[i];
                            if (!in[0].empty()) in[0][kind == Broadcast::left_scalar ? 0 : i] += g[i] * da(xi, yi);
                            if (!in[1].empty()) in[1][kind == Broadcast::right_scalar ? 0 : i] += g[i] * db(xi, yi);
                          }
                        });
}

// Elementwise unary op with derivative expressed through input and output.
template <class F, class D>
Tensor unary(const Tensor& x, const char* op, F f, D d) {
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  Impl ix = x.impl();
  auto result = make_op_result(x.shape(), std::move(out), op, {x}, nullptr);
  if (result.is_leaf()) return result;
  std::weak_ptr<detail::TensorImpl> weak_out = result.impl();
  result.impl()->node->backward = [ix, weak_out, d](std::span<const double> g, Grads& in) {
    const auto& xs = ix->data;
    // The output is alive while its node runs; it owns the node.
    const auto out_impl = weak_out.lock();
    const auto& ys = out_impl->data;
    for (std::size_t i = 0; i < xs.size(); ++i) in[0][i] += g[i] * d(xs[i], ys[i]);
  };
  return result;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.shape()[0];
  const std::size_t k = a.shape()[1];
  const std::size_t n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n);
  kernels::matmul(a.data(), b.data(), out, m, k, n);
  Impl ia = a.impl();
  Impl ib = b.impl();
  return make_op_result({m, n}, std::move(out), "matmul", {a, b},
                        [ia, ib, m, k, n](std::span<const double> g, Grads& in) {
                          // dA = G B^T, dB = A^T G
                          if (!in[0].empty()) kernels::matmul_nt_acc(g, ib->data, in[0], m, n, k);
                          if (!in[1].empty()) kernels::matmul_tn_acc(ia->data, g, in[1], k, m, n);
                        });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.data()) {
    if (v == 0.0) throw DomainError("div: division by zero");
  }
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& x) {
  return unary(
      x, "neg", [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, "add_scalar", [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  require_matrix(x, "add_bias");
  const std::size_t m = x.shape()[0];
  const std::size_t n = x.shape()[1];
  if (b.numel() != n) {
    throw DimensionError("add_bias: bias has " + std::to_string(b.numel()) + " values for " +
                         std::to_string(n) + " columns");
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  }
  return make_op_result({m, n}, std::move(out), "add_bias", {x, b},
                        [m, n](std::span<const double> g, Grads& in) {
                          if (!in[0].empty()) {
                            for (std::size_t i = 0; i < m * n; ++i) in[0][i] += g[i];
                          }
                          if (!in[1].empty()) {
                            for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t j = 0; j < n; ++j) in[1][j] += g[i * n + j];
                            }
                          }
                        });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw DomainError("log: argument must be positive");
  }
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  const std::size_t n = x.numel();
  return make_op_result({}, {s}, "sum", {x}, [n](std::span<const double> g, Grads& in) {
    for (std::size_t i = 0; i < n; ++i) in[0][i] += g[0];
  });
}

Tensor mean(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  const std::size_t n = x.numel();
  const double inv = 1.0 / static_cast<double>(n);
  return make_op_result({}, {s * inv}, "mean", {x}, [n, inv](std::span<const double> g, Grads& in) {
    for (std::size_t i = 0; i < n; ++i) in[0][i] += g[0] * inv;
  });
}

Tensor l2_norm(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  const double norm = std::sqrt(s);
  Impl ix = x.impl();
  return make_op_result({}, {norm}, "l2_norm", {x}, [ix, norm](std::span<const double> g, Grads& in) {
    // The subgradient at the origin is taken as zero.
    if (norm == 0.0) return;
    const auto& xs = ix->data;
    for (std::size_t i = 0; i < xs.size(); ++i) in[0][i] += g[0] * xs[i] / norm;
  });
}

Tensor sum_rows(const Tensor& x) {
  require_matrix(x, "sum_rows");
  const std::size_t m = x.shape()[0];
  const std::size_t n = x.shape()[1];
  std::vector<double> out(m, 0.0);
  const auto xv = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i] += xv[i * n + j];
  }
  return make_op_result({m, 1}, std::move(out), "sum_rows", {x}, [m, n](std::span<const double> g, Grads& in) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) in[0][i * n + j] += g[i];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.shape()[0];
  const std::size_t n = x.shape()[1];
  if (begin >= end || end > n) throw DimensionError("slice_cols: bad column range");
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  const auto xv = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = xv[i * n + begin + j];
  }
  return make_op_result({m, w}, std::move(out), "slice_cols", {x},
                        [m, n, w, begin](std::span<const double> g, Grads& in) {
                          for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < w; ++j) in[0][i * n + begin + j] += g[i * w + j];
                          }
                        });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_op_result(std::move(shape), std::move(out), "reshape", {x},
                        [](std::span<const double> g, Grads& in) {
                          for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i];
                        });
}

}  // namespace ltrans
