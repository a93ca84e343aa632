// SPDX-License-Identifier: Apache-2.0
//
// Serial reference loops against the OpenMP kernels.
#include <benchmark/benchmark.h>

#include <vector>

#include "ltrans/kernels.hpp"
#include "ltrans/rng.hpp"

namespace k = ltrans::kernels;

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  ltrans::RandomStream rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

template <bool Serial>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, 1);
  const auto b = filled(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Serial) {
      k::serial::matmul(a, b, c, n, n, n);
    } else {
      k::matmul(a, b, c, n, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

template <bool Serial>
void BM_MatmulTnAcc(benchmark::State& state) {
  // Weight-gradient shape: [batch x in]^T * [batch x out].
  const auto batch = static_cast<std::size_t>(state.range(0));
  const std::size_t in = 128, out = 128;
  const auto a = filled(batch * in, 3);
  const auto b = filled(batch * out, 4);
  std::vector<double> c(in * out);
  for (auto _ : state) {
    if constexpr (Serial) {
      k::serial::matmul_tn_acc(a, b, c, in, batch, out);
    } else {
      k::matmul_tn_acc(a, b, c, in, batch, out);
    }
    benchmark::DoNotOptimize(c.data());
  }
}

template <bool Serial>
void BM_MmdCross(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 8;
  const auto x = filled(n * d, 5);
  const auto y = filled(n * d, 6);
  const k::PolyKernel kernel{1.0 / d, 1.0, 3};
  for (auto _ : state) {
    double s = 0.0;
    if constexpr (Serial) {
      s = k::serial::poly_kernel_cross_sum(x, n, y, n, d, kernel) + k::serial::poly_kernel_offdiag_sum(x, n, d, kernel);
    } else {
      s = k::poly_kernel_cross_sum(x, n, y, n, d, kernel) + k::poly_kernel_offdiag_sum(x, n, d, kernel);
    }
    benchmark::DoNotOptimize(s);
  }
}

}  // namespace

BENCHMARK(BM_Matmul<true>)->Name("matmul/serial")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_Matmul<false>)->Name("matmul/openmp")->Arg(64)->Arg(256)->Arg(512)->UseRealTime();
BENCHMARK(BM_MatmulTnAcc<true>)->Name("matmul_tn_acc/serial")->Arg(64)->Arg(2000);
BENCHMARK(BM_MatmulTnAcc<false>)->Name("matmul_tn_acc/openmp")->Arg(64)->Arg(2000)->UseRealTime();
BENCHMARK(BM_MmdCross<true>)->Name("mmd_sums/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_MmdCross<false>)->Name("mmd_sums/openmp")->Arg(500)->Arg(2000)->UseRealTime();

BENCHMARK_MAIN();
