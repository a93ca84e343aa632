// SPDX-License-Identifier: Apache-2.0
#include "ltrans/kernels.hpp"

#include <vector>

#ifdef LTRANS_HAVE_OPENMP
#include <omp.h>
#endif

namespace ltrans::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

double ipow(double base, int exponent) {
  double result = 1.0;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

double dot(const double* x, const double* y, std::size_t d) {
  double s = 0.0;
  for (std::size_t p = 0; p < d; ++p) s += x[p] * y[p];
  return s;
}

}  // namespace

double PolyKernel::operator()(std::span<const double> x, std::span<const double> y) const {
  return ipow(scale * dot(x.data(), y.data(), x.size()) + coef, degree);
}

int max_threads() {
#ifdef LTRANS_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_num_threads(int n) {
#ifdef LTRANS_HAVE_OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const bool wide = m * k * n >= kParallelWork;
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* crow = pc + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void matmul_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const bool wide = m * k * n >= kParallelWork;
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < n; ++j) pc[i * n + j] += dot(pa + i * k, pb + j * k, k);
  }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const bool wide = m * k * n >= kParallelWork;
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double api = pa[p * m + i];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

// Both kernel sums reduce per row first and then add the row totals in
// order, so the result does not depend on the thread count.
double poly_kernel_offdiag_sum(std::span<const double> x, std::size_t n, std::size_t d,
                               const PolyKernel& kernel) {
  std::vector<double> row_sums(n, 0.0);
  const double* px = x.data();
  const bool wide = n * n * d >= kParallelWork;
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (static_cast<std::size_t>(i) == j) continue;
      s += ipow(kernel.scale * dot(px + i * d, px + j * d, d) + kernel.coef, kernel.degree);
    }
    row_sums[i] = s;
  }
  double total = 0.0;
  for (double s : row_sums) total += s;
  return total;
}

double poly_kernel_cross_sum(std::span<const double> x, std::size_t n, std::span<const double> y,
                             std::size_t m, std::size_t d, const PolyKernel& kernel) {
  std::vector<double> row_sums(n, 0.0);
  const double* px = x.data();
  const double* py = y.data();
  const bool wide = n * m * d >= kParallelWork;
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      s += ipow(kernel.scale * dot(px + i * d, py + j * d, d) + kernel.coef, kernel.degree);
    }
    row_sums[i] = s;
  }
  double total = 0.0;
  for (double s : row_sums) total += s;
  return total;
}

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void matmul_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] += s;
    }
  }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      c[i * n + j] += s;
    }
  }
}

double poly_kernel_offdiag_sum(std::span<const double> x, std::size_t n, std::size_t d,
                               const PolyKernel& kernel) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) s += kernel(x.subspan(i * d, d), x.subspan(j * d, d));
    }
    total += s;
  }
  return total;
}

double poly_kernel_cross_sum(std::span<const double> x, std::size_t n, std::span<const double> y,
                             std::size_t m, std::size_t d, const PolyKernel& kernel) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += kernel(x.subspan(i * d, d), y.subspan(j * d, d));
    total += s;
  }
  return total;
}

}  // namespace serial
}  // namespace ltrans::kernels
