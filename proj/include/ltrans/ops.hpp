// SPDX-License-Identifier: Apache-2.0
//
// Differentiable ops. Binary elementwise ops take equal shapes, or one
// single-element operand that is broadcast; nothing else broadcasts.
#pragma once

#include <cstddef>

#include "ltrans/tensor.hpp"

namespace ltrans {

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Throws DomainError when any divisor is zero.
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

/// x[m x n] + b, with b holding n values, added to every row.
Tensor add_bias(const Tensor& x, const Tensor& b);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
/// Throws DomainError on non-positive input.
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);

/// Reductions to a rank-0 tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor l2_norm(const Tensor& x);

/// Row sums of a matrix: [m x n] -> [m x 1].
Tensor sum_rows(const Tensor& x);

/// Columns [begin, end) of a matrix.
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }
inline Tensor operator*(const Tensor& x, double c) { return scale(x, c); }
inline Tensor operator*(double c, const Tensor& x) { return scale(x, c); }

}  // namespace ltrans
