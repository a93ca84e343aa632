// SPDX-License-Identifier: Apache-2.0
//
// Shared test utilities: finite differences and scratch directories.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "ltrans/tensor.hpp"

namespace ltrans::test {

// Central differences of a scalar function of `x`'s values.
inline std::vector<double> numeric_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                        double h = 1e-6) {
  std::vector<double> g(x.numel());
  std::vector<double> base(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto plus = base;
    auto minus = base;
    plus[i] += h;
    minus[i] -= h;
    g[i] = (f(Tensor(x.shape(), plus)) - f(Tensor(x.shape(), minus))) / (2.0 * h);
  }
  return g;
}

// max over entries of |a - fd| / (|fd| + 1e-8).
inline double max_rel_err(std::span<const double> a, std::span<const double> fd) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - fd[i]) / (std::abs(fd[i]) + 1e-8));
  }
  return worst;
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ltrans-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace ltrans::test
