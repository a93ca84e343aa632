// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one JSON document, strict about unknown keys, with
// dotted-path overrides. Every field has a default, so `{}` is a valid
// pie run.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ltrans/data.hpp"
#include "ltrans/nets.hpp"
#include "ltrans/optim.hpp"
#include "ltrans/transport.hpp"

namespace ltrans {

enum class DataKind { pie, glyph };

std::string to_string(DataKind k);
DataKind parse_data_kind(const std::string& name);

struct PieGeometry {
  std::array<double, 2> center{0.0, 0.0};
  double inner = 0.3;
  double outer = 1.0;
  double start_deg = 0.0;
  double sweep_deg = 90.0;
};

struct GlyphStyle {
  std::size_t side = 12;
  double position_jitter = 1.5;
  double scale_min = 2.5;
  double scale_max = 4.0;
  double intensity_min = 0.6;
  double intensity_max = 1.0;
};

struct DataConfig {
  DataKind kind = DataKind::pie;
  std::size_t count = 2000;  // per domain
  PieGeometry pie_x{{0.0, 0.0}, 0.3, 1.0, 100.0, 120.0};
  PieGeometry pie_y{{0.0, 0.0}, 0.3, 1.0, 280.0, 120.0};
  GlyphStyle glyph;
  GlyphKind glyph_x = GlyphKind::disc;
  GlyphKind glyph_y = GlyphKind::cross;
  std::size_t preview_count = 64;
};

struct AeConfig {
  AeMode mode = AeMode::beta_vae;
  std::size_t latent_dim = 8;
  std::vector<std::size_t> hidden{64};
  double beta = 0.01;
  Activation decoder_output = Activation::identity;
  std::size_t epochs = 300;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer{OptimizerKind::adam, 1e-3};
};

struct EbmConfig {
  std::vector<std::size_t> hidden{128};
  double leaky_slope = 0.2;
  std::size_t iterations = 1000;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer{OptimizerKind::sgd, 0.01};
};

struct TranslateConfig {
  /// Rows per parallel chain chunk; 0 runs one chunk.
  std::size_t chunk_rows = 256;
  /// Frame strip every `frame_stride` steps; 0 disables the strip.
  std::size_t frame_stride = 0;
  /// Samples shown in image grids and frame strips.
  std::size_t grid_count = 64;
};

struct RunConfig {
  std::string experiment = "pie";
  std::uint64_t seed = 1;
  std::string output_dir = "runs/pie";
  DataConfig data;
  AeConfig ae;
  EbmConfig ebm;
  LangevinConfig langevin_train{10, 1.0, StepDecay::constant, 0.55, 1.0, 0.1, false};
  LangevinConfig langevin_translate{10, 1.0, StepDecay::constant, 0.55, 1.0, 0.0, true};
  TranslateConfig translate;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Defaults for each data kind. The glyph run uses the 32-dim beta-VAE and
/// the 32-64-1 energy recipe.
RunConfig default_run_config(DataKind kind);

nlohmann::json to_json(const RunConfig& cfg);

/// Reads `doc` on top of the defaults for its `data.kind`. Unknown keys and
/// type mismatches throw ConfigError; misspelled keys get a suggestion.
RunConfig parse_run_config(const nlohmann::json& doc);

/// Applies `a.b.c=value`. The value is read as JSON when it parses and as
/// a string otherwise. Throws ConfigError on a malformed assignment.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// Loads `path` (or `{}` when absent), applies the overrides in order and
/// parses the result. Throws ConfigError, including for unreadable files.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides = {});

/// Environment variable that, when set, prefixes relative output paths.
inline constexpr const char* kOutputRootEnv = "LTRANS_OUTPUT_ROOT";

/// The explicit `out` when given, else cfg.output_dir; relative results are
/// placed under $LTRANS_OUTPUT_ROOT when that is set.
std::filesystem::path resolve_output_dir(const RunConfig& cfg, const std::optional<std::filesystem::path>& out);

/// Seeds for each random consumer, all derived from cfg.seed.
struct DerivedSeeds {
  std::uint64_t data_x;
  std::uint64_t data_y;
  std::uint64_t autoencoder;
  std::uint64_t ebm_x2y;
  std::uint64_t ebm_y2x;
  std::uint64_t translate_x2y;
  std::uint64_t translate_y2x;
};

DerivedSeeds derive_seeds(std::uint64_t seed);

std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace ltrans
