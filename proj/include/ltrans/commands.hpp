// SPDX-License-Identifier: Apache-2.0
//
// The pipeline stages behind the `ltrans` subcommands. Each returns the
// files it wrote; failures surface as CommandError carrying the exit code.
#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltrans/config.hpp"

namespace ltrans {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitMissingData = 3,
  kExitModelMismatch = 4,
  kExitCorruptArtifact = 5,
  kExitMetricPrecondition = 6,
};

class CommandError : public std::runtime_error {
 public:
  CommandError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

struct CommandOutput {
  std::vector<std::filesystem::path> artifacts;
  std::vector<std::string> warnings;
};

enum class Direction { x2y, y2x };

std::string to_string(Direction d);
/// Throws CommandError(kExitConfig) on anything but "x2y" / "y2x".
Direction parse_direction(const std::string& name);

/// Artifact names inside an output directory. Bases have no extension;
/// the checkpoint layer appends .json and .bin.
namespace artifacts {
inline constexpr const char* kDataX = "data_x";
inline constexpr const char* kDataY = "data_y";
inline constexpr const char* kPreview = "preview.ppm";
inline constexpr const char* kAutoencoder = "ae";
inline constexpr const char* kAeLoss = "ae_loss.csv";
std::string ebm(Direction d);           // ebm_x2y
std::string train_report(Direction d);  // train_report_x2y.csv
std::string translated(Direction d);    // translated_x2y
std::string trajectory(Direction d);    // trajectory_x2y
inline constexpr const char* kHeatmap = "heatmap.csv";
inline constexpr const char* kMutualInverse = "mutual_inverse.csv";
inline constexpr const char* kEnergyGap = "energy_gap.csv";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kReconMse = "recon_mse.csv";
}  // namespace artifacts

/// Writes both domain caches and a preview image.
CommandOutput run_gen_data(const RunConfig& cfg, const std::filesystem::path& out);

/// Trains the autoencoder on the pooled caches found in `data_dir`.
CommandOutput run_pretrain_ae(const RunConfig& cfg, const std::filesystem::path& data_dir,
                              const std::filesystem::path& out);

/// Trains one direction's energy over the frozen autoencoder.
CommandOutput run_train_ebm(const RunConfig& cfg, const std::filesystem::path& ae_base,
                            const std::filesystem::path& data_dir, Direction direction,
                            const std::filesystem::path& out);

struct TranslateOptions {
  std::optional<std::size_t> steps_override;
  std::optional<double> noise;   // replaces langevin_translate.noise_scale
  std::optional<std::size_t> stride;  // replaces translate.frame_stride
};

/// Transports the rows of the dataset cache `input_base` with the EBM at
/// `ebm_base` and decodes them.
CommandOutput run_translate(const RunConfig& cfg, const std::filesystem::path& ae_base,
                            const std::filesystem::path& ebm_base, const std::filesystem::path& input_base,
                            const TranslateOptions& options, const std::filesystem::path& out);

/// Shift heatmap, mutual-inverse score and energy-gap report from stored
/// trajectories.
CommandOutput run_analyze(const std::vector<std::filesystem::path>& trajectory_bases,
                          const std::filesystem::path& out);

/// Frechet distance and MMD^2 between encoder features of translated and
/// target sets, with the untranslated sources as the reference row.
CommandOutput run_eval(const std::filesystem::path& ae_base, const std::filesystem::path& translated_base,
                       const std::filesystem::path& target_base, const std::filesystem::path& out);

/// Header of metrics.csv.
std::vector<std::string> metrics_headers();

}  // namespace ltrans
