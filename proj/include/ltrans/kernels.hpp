// SPDX-License-Identifier: Apache-2.0
//
// Dense inner loops. The default namespace holds the OpenMP versions; the
// `serial` namespace keeps straightforward reference loops that the tests
// and the benchmark compare against.
#pragma once

#include <cstddef>
#include <span>

namespace ltrans::kernels {

/// c[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
/// c[m x n] += a[m x k] * b[n x k]^T
void matmul_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);
/// c[m x n] += a[k x m]^T * b[k x n]
void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);

/// Polynomial kernel k(x, y) = (scale * <x, y> + coef)^degree.
struct PolyKernel {
  double scale = 1.0;
  double coef = 1.0;
  int degree = 3;

  double operator()(std::span<const double> x, std::span<const double> y) const;
};

/// Sum of k(x_i, x_j) over i != j for the rows of x[n x d].
double poly_kernel_offdiag_sum(std::span<const double> x, std::size_t n, std::size_t d,
                               const PolyKernel& kernel);
/// Sum of k(x_i, y_j) over all pairs of rows.
double poly_kernel_cross_sum(std::span<const double> x, std::size_t n, std::span<const double> y,
                             std::size_t m, std::size_t d, const PolyKernel& kernel);

/// Maximum number of threads the OpenMP kernels will use (1 without OpenMP).
int max_threads();
void set_num_threads(int n);

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);
double poly_kernel_offdiag_sum(std::span<const double> x, std::size_t n, std::size_t d,
                               const PolyKernel& kernel);
double poly_kernel_cross_sum(std::span<const double> x, std::size_t n, std::span<const double> y,
                             std::size_t m, std::size_t d, const PolyKernel& kernel);

}  // namespace serial
}  // namespace ltrans::kernels
