// SPDX-License-Identifier: Apache-2.0
//
// The OpenMP kernels against the serial reference loops.
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ltrans/kernels.hpp"
#include "ltrans/rng.hpp"

using namespace ltrans;
namespace k = ltrans::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

struct Dims {
  std::size_t m, kk, n;
};

}  // namespace

TEST_CASE("matmul variants agree with the serial loops") {
  for (const Dims d : {Dims{1, 1, 1}, Dims{5, 7, 3}, Dims{64, 33, 17}, Dims{300, 40, 9}}) {
    CAPTURE(d.m);
    const auto a = random_values(d.m * d.kk, 1);
    const auto b = random_values(d.kk * d.n, 2);
    std::vector<double> c1(d.m * d.n), c2(d.m * d.n);
    k::matmul(a, b, c1, d.m, d.kk, d.n);
    k::serial::matmul(a, b, c2, d.m, d.kk, d.n);
    CHECK(max_abs_diff(c1, c2) < 1e-12);

    // a[m x k] * bt[n x k]^T, accumulating into a non-zero start.
    const auto bt = random_values(d.n * d.kk, 3);
    std::vector<double> n1(d.m * d.n, 0.5), n2(d.m * d.n, 0.5);
    k::matmul_nt_acc(a, bt, n1, d.m, d.kk, d.n);
    k::serial::matmul_nt_acc(a, bt, n2, d.m, d.kk, d.n);
    CHECK(max_abs_diff(n1, n2) < 1e-12);

    // at[k x m]^T * b[k x n]
    const auto at = random_values(d.kk * d.m, 4);
    std::vector<double> t1(d.m * d.n, -0.25), t2(d.m * d.n, -0.25);
    k::matmul_tn_acc(at, b, t1, d.m, d.kk, d.n);
    k::serial::matmul_tn_acc(at, b, t2, d.m, d.kk, d.n);
    CHECK(max_abs_diff(t1, t2) < 1e-12);
  }
}

TEST_CASE("serial matmul hand case") {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{5, 6, 7, 8};
  std::vector<double> c(4);
  k::serial::matmul(a, b, c, 2, 2, 2);
  CHECK(c == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("polynomial kernel sums agree with the serial loops") {
  const k::PolyKernel kernel{1.0 / 6.0, 1.0, 3};
  for (std::size_t n : {2u, 17u, 257u}) {
    CAPTURE(n);
    const auto x = random_values(n * 6, 10 + n);
    const auto y = random_values((n + 3) * 6, 20 + n);
    const double off = k::poly_kernel_offdiag_sum(x, n, 6, kernel);
    const double off_ref = k::serial::poly_kernel_offdiag_sum(x, n, 6, kernel);
    CHECK(off == doctest::Approx(off_ref).epsilon(1e-12));
    const double cross = k::poly_kernel_cross_sum(x, n, y, n + 3, 6, kernel);
    const double cross_ref = k::serial::poly_kernel_cross_sum(x, n, y, n + 3, 6, kernel);
    CHECK(cross == doctest::Approx(cross_ref).epsilon(1e-12));
  }
}

TEST_CASE("polynomial kernel value") {
  const k::PolyKernel kernel{0.5, 1.0, 3};
  const std::vector<double> x{1, 2};
  const std::vector<double> y{3, 4};
  CHECK(kernel(x, y) == (0.5 * 11 + 1) * (0.5 * 11 + 1) * (0.5 * 11 + 1));
}

TEST_CASE("thread count does not change results") {
  const std::size_t n = 200;
  const auto x = random_values(n * 4, 31);
  const k::PolyKernel kernel{0.25, 1.0, 3};
  const int before = k::max_threads();
  k::set_num_threads(1);
  const double one = k::poly_kernel_offdiag_sum(x, n, 4, kernel);
  k::set_num_threads(std::max(2, before));
  const double many = k::poly_kernel_offdiag_sum(x, n, 4, kernel);
  k::set_num_threads(before);
  CHECK(one == doctest::Approx(many).epsilon(1e-12));
}
