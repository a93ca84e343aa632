// SPDX-License-Identifier: Apache-2.0
//
// Synthetic two-domain problems and dataset plumbing.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ltrans/rng.hpp"
#include "ltrans/tensor.hpp"

namespace ltrans {

enum class Domain { x, y };

std::string to_string(Domain d);
Domain parse_domain(const std::string& name);

struct DomainDataset {
  Domain domain = Domain::x;
  Tensor samples;  // [n x data_dim]
  bool image_mode = false;
  std::size_t image_side = 0;
  std::vector<double> feature_min;
  std::vector<double> feature_max;

  std::size_t size() const { return samples.rows(); }
  std::size_t data_dim() const { return samples.cols(); }
  /// n >= 2, finite values, image values in [0, 1], metadata consistent.
  void validate() const;
};

/// Builds a dataset and fills in per-feature min/max.
DomainDataset make_dataset(Domain domain, Tensor samples, bool image_mode = false, std::size_t image_side = 0);

/// Annular sector: radius in [inner, outer], angle from start_deg sweeping
/// counter-clockwise by sweep_deg.
struct PieSpec {
  std::array<double, 2> center{0.0, 0.0};
  double inner = 0.3;
  double outer = 1.0;
  double start_deg = 0.0;
  double sweep_deg = 90.0;
  std::size_t count = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  bool contains(double px, double py) const;
  /// Area centroid of the sector.
  std::array<double, 2> centroid() const;
};

/// Sector covering [100, 220] degrees.
PieSpec default_pie_x(std::size_t count, std::uint64_t seed);
/// Sector covering [280, 40] degrees, wrapping through zero.
PieSpec default_pie_y(std::size_t count, std::uint64_t seed);

/// Points uniform over each sector's area.
DomainDataset gen_pie(const PieSpec& spec, Domain domain);
std::pair<DomainDataset, DomainDataset> gen_pies(const PieSpec& spec_x, const PieSpec& spec_y);

enum class GlyphKind { disc, cross };

std::string to_string(GlyphKind k);
GlyphKind parse_glyph_kind(const std::string& name);

/// Grayscale glyph on a black background. Position, size and brightness
/// jitter are the shared factors; the glyph kind is what tells the domains
/// apart.
struct GlyphSpec {
  std::size_t side = 12;
  GlyphKind kind = GlyphKind::disc;
  double position_jitter = 1.5;  // max center offset in pixels
  double scale_min = 2.5;        // glyph radius (disc) or arm half-length (cross)
  double scale_max = 4.0;
  double intensity_min = 0.6;
  double intensity_max = 1.0;
  std::size_t count = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GlyphParams {
  double cx;
  double cy;
  double scale;
  double intensity;
};

/// Renders one glyph with 4x4 supersampled coverage, values in [0, 1].
std::vector<double> render_glyph(std::size_t side, GlyphKind kind, const GlyphParams& params);

DomainDataset gen_glyph(const GlyphSpec& spec, Domain domain);
std::pair<DomainDataset, DomainDataset> gen_glyphs(const GlyphSpec& spec_x, const GlyphSpec& spec_y);

/// One epoch of shuffled batches without replacement; the final short
/// batch is kept.
class BatchIterator {
 public:
  BatchIterator(const DomainDataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed,
                std::uint64_t epoch = 0);

  std::optional<Tensor> next();
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const DomainDataset* ds_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Endless batch source: walks successive epochs, each with its own
/// shuffle derived from the seed.
class BatchStream {
 public:
  BatchStream(const DomainDataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed);
  Tensor next();
  std::uint64_t epoch() const { return epoch_; }

 private:
  const DomainDataset* ds_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  BatchIterator current_;
};

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, RandomStream& rng);

/// Stacks the rows of two datasets with matching width.
Tensor concat_rows(const Tensor& a, const Tensor& b);

struct Checkpoint;
Checkpoint dataset_to_checkpoint(const DomainDataset& ds);
DomainDataset dataset_from_checkpoint(const Checkpoint& ckpt);
void save_dataset(const DomainDataset& ds, const std::filesystem::path& base);
DomainDataset load_dataset(const std::filesystem::path& base);

}  // namespace ltrans
