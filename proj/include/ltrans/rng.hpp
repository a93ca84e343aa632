// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace ltrans {

/// Counter-based generator. Every draw is a pure function of
/// (key, counter), so a stream can be rebuilt from its key alone.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) : key_(key) {}

  /// Derives the stream named `name` (with an optional index) from a run
  /// seed. Distinct names give statistically independent streams.
  static RandomStream named(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// Stream names used across the pipeline.
namespace streams {
inline constexpr std::string_view kInit = "init";
inline constexpr std::string_view kLangevinNoise = "langevin-noise";
inline constexpr std::string_view kDataShuffle = "data-shuffle";
inline constexpr std::string_view kReparam = "reparam";
inline constexpr std::string_view kDataX = "data-x";
inline constexpr std::string_view kDataY = "data-y";
}  // namespace streams

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace ltrans
