// SPDX-License-Identifier: Apache-2.0
#include "ltrans/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ltrans/checkpoint.hpp"
#include "ltrans/errors.hpp"

namespace ltrans {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  return w;
}
}  // namespace

std::string to_string(Domain d) { return d == Domain::x ? "x" : "y"; }

Domain parse_domain(const std::string& name) {
  if (name == "x" || name == "X") return Domain::x;
  if (name == "y" || name == "Y") return Domain::y;
  throw ContractError("unknown domain '" + name + "'");
}

std::string to_string(GlyphKind k) { return k == GlyphKind::disc ? "disc" : "cross"; }

GlyphKind parse_glyph_kind(const std::string& name) {
  if (name == "disc") return GlyphKind::disc;
  if (name == "cross") return GlyphKind::cross;
  throw ContractError("unknown glyph kind '" + name + "'");
}

void DomainDataset::validate() const {
  if (!samples.defined() || samples.rank() != 2) throw ContractError("dataset samples must be a matrix");
  if (size() < 2) throw ContractError("a dataset needs at least two samples");
  for (double v : samples.data()) {
    if (!std::isfinite(v)) throw ContractError("dataset contains a non-finite value");
    if (image_mode && (v < 0.0 || v > 1.0)) throw ContractError("image dataset value outside [0, 1]");
  }
  if (image_mode && image_side * image_side != data_dim()) {
    throw ContractError("image side does not match the data dimension");
  }
  if (feature_min.size() != data_dim() || feature_max.size() != data_dim()) {
    throw ContractError("normalization metadata does not match the data dimension");
  }
}

DomainDataset make_dataset(Domain domain, Tensor samples, bool image_mode, std::size_t image_side) {
  DomainDataset ds;
  ds.domain = domain;
  ds.samples = std::move(samples);
  ds.image_mode = image_mode;
  ds.image_side = image_side;
  const std::size_t d = ds.samples.cols();
  ds.feature_min.assign(d, std::numeric_limits<double>::infinity());
  ds.feature_max.assign(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < ds.samples.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double v = ds.samples.at(i, j);
      ds.feature_min[j] = std::min(ds.feature_min[j], v);
      ds.feature_max[j] = std::max(ds.feature_max[j], v);
    }
  }
  ds.validate();
  return ds;
}

void PieSpec::validate() const {
  if (!(inner >= 0.0 && inner < outer)) throw ContractError("pie radii need 0 <= inner < outer");
  if (!(sweep_deg > 0.0 && sweep_deg <= 360.0)) throw ContractError("pie sweep must lie in (0, 360]");
  if (count < 2) throw ContractError("a pie needs at least two samples");
}

bool PieSpec::contains(double px, double py) const {
  const double dx = px - center[0];
  const double dy = py - center[1];
  const double r = std::hypot(dx, dy);
  if (r < inner || r > outer) return false;
  if (sweep_deg >= 360.0) return true;
  const double angle = std::atan2(dy, dx) / kDegToRad;
  return wrap_degrees(angle - start_deg) <= sweep_deg;
}

std::array<double, 2> PieSpec::centroid() const {
  const double half = 0.5 * sweep_deg * kDegToRad;
  const double bisector = (start_deg + 0.5 * sweep_deg) * kDegToRad;
  const double radial = (2.0 / 3.0) * (outer * outer * outer - inner * inner * inner) /
                        (outer * outer - inner * inner) * std::sin(half) / half;
  return {center[0] + radial * std::cos(bisector), center[1] + radial * std::sin(bisector)};
}

PieSpec default_pie_x(std::size_t count, std::uint64_t seed) {
  PieSpec spec;
  spec.start_deg = 100.0;
  spec.sweep_deg = 120.0;
  spec.count = count;
  spec.seed = seed;
  return spec;
}

PieSpec default_pie_y(std::size_t count, std::uint64_t seed) {
  PieSpec spec;
  spec.start_deg = 280.0;
  spec.sweep_deg = 120.0;
  spec.count = count;
  spec.seed = seed;
  return spec;
}

DomainDataset gen_pie(const PieSpec& spec, Domain domain) {
  spec.validate();
  RandomStream rng(spec.seed);
  std::vector<double> points(2 * spec.count);
  const double r2_lo = spec.inner * spec.inner;
  const double r2_hi = spec.outer * spec.outer;
  for (std::size_t i = 0; i < spec.count; ++i) {
    // Inverse-CDF in r^2 gives uniform density over the area.
    const double r = std::min(spec.outer, std::sqrt(r2_lo + rng.uniform() * (r2_hi - r2_lo)));
    const double theta = (spec.start_deg + rng.uniform() * spec.sweep_deg) * kDegToRad;
    points[2 * i] = spec.center[0] + r * std::cos(theta);
    points[2 * i + 1] = spec.center[1] + r * std::sin(theta);
  }
  return make_dataset(domain, Tensor({spec.count, 2}, std::move(points)));
}

std::pair<DomainDataset, DomainDataset> gen_pies(const PieSpec& spec_x, const PieSpec& spec_y) {
  return {gen_pie(spec_x, Domain::x), gen_pie(spec_y, Domain::y)};
}

void GlyphSpec::validate() const {
  if (side < 8) throw ContractError("glyph side must be at least 8 pixels");
  if (!(position_jitter >= 0.0)) throw ContractError("position jitter must be non-negative");
  if (!(scale_min > 0.0 && scale_min <= scale_max)) throw ContractError("glyph scale range is invalid");
  if (0.5 * static_cast<double>(side) - position_jitter - scale_max < 0.0) {
    throw ContractError("glyph jitter and scale would leave the frame");
  }
  if (!(intensity_min >= 0.0 && intensity_min <= intensity_max && intensity_max <= 1.0)) {
    throw ContractError("glyph intensity range must lie in [0, 1]");
  }
  if (count < 2) throw ContractError("a glyph set needs at least two samples");
}

std::vector<double> render_glyph(std::size_t side, GlyphKind kind, const GlyphParams& p) {
  constexpr int kSub = 4;
  std::vector<double> image(side * side, 0.0);
  const double arm = 0.3 * p.scale;
  for (std::size_t row = 0; row < side; ++row) {
    for (std::size_t col = 0; col < side; ++col) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double x = static_cast<double>(col) + (sx + 0.5) / kSub - p.cx;
          const double y = static_cast<double>(row) + (sy + 0.5) / kSub - p.cy;
          bool inside = false;
          if (kind == GlyphKind::disc) {
            inside = x * x + y * y <= p.scale * p.scale;
          } else {
            inside = (std::abs(x) <= p.scale && std::abs(y) <= arm) || (std::abs(y) <= p.scale && std::abs(x) <= arm);
          }
          hits += inside ? 1 : 0;
        }
      }
      const double v = p.intensity * static_cast<double>(hits) / (kSub * kSub);
      image[row * side + col] = std::clamp(v, 0.0, 1.0);
    }
  }
  return image;
}

DomainDataset gen_glyph(const GlyphSpec& spec, Domain domain) {
  spec.validate();
  RandomStream rng(spec.seed);
  const std::size_t pixels = spec.side * spec.side;
  std::vector<double> values;
  values.reserve(spec.count * pixels);
  const double mid = 0.5 * static_cast<double>(spec.side);
  for (std::size_t i = 0; i < spec.count; ++i) {
    GlyphParams p{};
    p.cx = mid + rng.uniform(-spec.position_jitter, spec.position_jitter);
    p.cy = mid + rng.uniform(-spec.position_jitter, spec.position_jitter);
    p.scale = rng.uniform(spec.scale_min, spec.scale_max);
    p.intensity = rng.uniform(spec.intensity_min, spec.intensity_max);
    const auto image = render_glyph(spec.side, spec.kind, p);
    values.insert(values.end(), image.begin(), image.end());
  }
  return make_dataset(domain, Tensor({spec.count, pixels}, std::move(values)), true, spec.side);
}

std::pair<DomainDataset, DomainDataset> gen_glyphs(const GlyphSpec& spec_x, const GlyphSpec& spec_y) {
  if (spec_x.side != spec_y.side) throw ContractError("glyph domains must share the image side");
  return {gen_glyph(spec_x, Domain::x), gen_glyph(spec_y, Domain::y)};
}

std::vector<std::size_t> shuffled_indices(std::size_t n, RandomStream& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

BatchIterator::BatchIterator(const DomainDataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed,
                             std::uint64_t epoch)
    : ds_(&ds), batch_size_(batch_size) {
  if (batch_size == 0) throw ContractError("batch size must be at least 1");
  auto rng = RandomStream::named(shuffle_seed, streams::kDataShuffle, epoch);
  order_ = shuffled_indices(ds.size(), rng);
}

std::optional<Tensor> BatchIterator::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::span<const std::size_t> idx(order_.data() + cursor_, end - cursor_);
  cursor_ = end;
  return ds_->samples.select_rows(idx);
}

BatchStream::BatchStream(const DomainDataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed)
    : ds_(&ds), batch_size_(batch_size), seed_(shuffle_seed), current_(ds, batch_size, shuffle_seed, 0) {}

Tensor BatchStream::next() {
  auto batch = current_.next();
  if (!batch) {
    ++epoch_;
    current_ = BatchIterator(*ds_, batch_size_, seed_, epoch_);
    batch = current_.next();
  }
  return *batch;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) throw DimensionError("concat_rows: widths differ");
  std::vector<double> values(a.data().begin(), a.data().end());
  values.insert(values.end(), b.data().begin(), b.data().end());
  return Tensor({a.rows() + b.rows(), a.cols()}, std::move(values));
}

Checkpoint dataset_to_checkpoint(const DomainDataset& ds) {
  Checkpoint ckpt;
  ckpt.meta = nlohmann::json{{"kind", "dataset"},
                             {"domain", to_string(ds.domain)},
                             {"image_mode", ds.image_mode},
                             {"image_side", ds.image_side}};
  ckpt.add("samples", ds.samples);
  ckpt.add("feature_min", Tensor({ds.feature_min.size()}, ds.feature_min));
  ckpt.add("feature_max", Tensor({ds.feature_max.size()}, ds.feature_max));
  return ckpt;
}

DomainDataset dataset_from_checkpoint(const Checkpoint& ckpt) {
  try {
    if (ckpt.meta.at("kind").get<std::string>() != "dataset") throw FormatError("file is not a dataset cache");
    DomainDataset ds;
    ds.domain = parse_domain(ckpt.meta.at("domain").get<std::string>());
    ds.image_mode = ckpt.meta.at("image_mode").get<bool>();
    ds.image_side = ckpt.meta.at("image_side").get<std::size_t>();
    ds.samples = ckpt.get("samples");
    const auto lo = ckpt.get("feature_min").data();
    const auto hi = ckpt.get("feature_max").data();
    ds.feature_min.assign(lo.begin(), lo.end());
    ds.feature_max.assign(hi.begin(), hi.end());
    ds.validate();
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset metadata is malformed: ") + e.what());
  } catch (const ContractError& e) {
    throw FormatError(std::string("dataset cache is invalid: ") + e.what());
  }
}

void save_dataset(const DomainDataset& ds, const std::filesystem::path& base) {
  save_checkpoint(dataset_to_checkpoint(ds), base);
}

DomainDataset load_dataset(const std::filesystem::path& base) {
  return dataset_from_checkpoint(load_checkpoint(base));
}

}  // namespace ltrans
