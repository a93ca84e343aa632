// SPDX-License-Identifier: Apache-2.0
//
// Latent energy transport: Langevin sampling over latent codes,
// maximum-likelihood training of the latent energy, and translation.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ltrans/data.hpp"
#include "ltrans/io.hpp"
#include "ltrans/nets.hpp"
#include "ltrans/optim.hpp"
#include "ltrans/tensor.hpp"

namespace ltrans {

enum class StepDecay { constant, polynomial };

std::string to_string(StepDecay d);
StepDecay parse_step_decay(const std::string& name);

struct LangevinConfig {
  std::size_t steps = 10;
  double step_size = 0.1;
  StepDecay decay = StepDecay::constant;
  double decay_gamma = 0.55;
  double decay_offset = 1.0;
  /// Multiplies the sqrt(eta) * eps diffusion term; 1 is the textbook chain.
  double noise_scale = 1.0;
  bool record_trajectory = false;

  /// steps may be 0 (no transport); everything else must be in range.
  void validate() const;
  /// eta^t for t = 0, 1, ...: constant, or step_size * (offset + t)^-gamma.
  double step_size_at(std::size_t t) const;
};

/// Chains whose energy or coordinates exceed these magnitudes are aborted.
inline constexpr double kEnergyLimit = 1e6;
inline constexpr double kLatentLimit = 1e6;

/// Recorded chain. Row r of the batch drew its noise from
/// RandomStream(noise_keys[r / chunk_rows]) starting at counter zero, one
/// chunk_rows x dim block per step.
struct Trajectory {
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::size_t dim = 0;
  std::vector<double> latents;    // (steps + 1) x batch x dim
  std::vector<double> gradients;  // steps x batch x dim, dE/dz at z^t
  std::vector<double> energies;   // (steps + 1) x batch
  std::vector<double> step_sizes;
  double noise_scale = 0.0;
  std::vector<std::uint64_t> noise_keys;
  std::size_t chunk_rows = 0;
  std::string direction;

  Tensor latent_at(std::size_t t) const;
  Tensor gradient_at(std::size_t t) const;
  std::span<const double> energies_at(std::size_t t) const;
  void validate() const;
};

using EnergyFn = std::function<Tensor(const Tensor&)>;

struct ChainResult {
  Tensor z;  // detached z^T
  std::optional<Trajectory> trajectory;
};

/// Runs z <- z - (eta^t / 2) dE/dz + sqrt(eta^t) * noise_scale * eps for
/// cfg.steps steps. `energy` maps [batch x dim] to per-row energies
/// [batch x 1]. The returned samples carry no graph. Throws
/// DivergedChainError on a non-finite or runaway energy, gradient or code.
ChainResult langevin_sample(const EnergyFn& energy, const Tensor& z0, const LangevinConfig& cfg,
                            std::uint64_t noise_key);
ChainResult langevin_sample(const EnergyModel& model, const Tensor& z0, const LangevinConfig& cfg,
                            std::uint64_t noise_key);

/// Rebuilds every z^t from z^0, the stored gradients and the noise keys.
std::vector<double> replay_latents(const Trajectory& traj);

struct TrainRow {
  double pos_energy = 0.0;  // mean E over target codes
  double neg_energy = 0.0;  // mean E over chain samples
  double gap = 0.0;         // pos - neg, the minimized surrogate
};

struct TrainReport {
  std::vector<double> pos_energy;
  std::vector<double> neg_energy;
  std::vector<double> gap;
  std::vector<double> wall_seconds;

  std::size_t size() const { return gap.size(); }
  void append(const TrainRow& row, double seconds);
  /// iteration, pos_energy, neg_energy, gap. Wall-clock stays out so the
  /// file is reproducible.
  CsvTable to_csv() const;
};

struct EbmStep {
  TrainRow row;
  Tensor negatives;  // z~^T
};

/// One maximum-likelihood update: chain from z_neg_init, then descend
/// mean E(z_pos) - mean E(z~^T) with the chain output held fixed.
EbmStep ebm_grad_step(EnergyModel& model, const Tensor& z_pos, const Tensor& z_neg_init, const LangevinConfig& cfg,
                      Optimizer& opt, std::uint64_t noise_key);

struct EbmTrainConfig {
  std::vector<std::size_t> hidden{64};
  double leaky_slope = 0.2;
  OptimizerConfig optimizer{OptimizerKind::sgd, 0.1};
  std::size_t iterations = 200;
  std::size_t batch_size = 64;
  LangevinConfig langevin;
};

struct EbmTrainResult {
  EnergyModel model;
  TrainReport report;
};

/// Trains E_{source -> target}. The autoencoder is only read. Codes are
/// plain encoder outputs or beta-VAE posterior means.
EbmTrainResult train_ebm(const AutoencoderModel& ae, const DomainDataset& source, const DomainDataset& target,
                         const EbmTrainConfig& cfg, std::uint64_t seed);

struct Translation {
  Tensor output;      // Dec(z^T)
  Trajectory trajectory;
};

/// Dec(chain(Enc(x))). Rows are split into chunks of `chunk_rows` (0 = one
/// chunk) that run in parallel, each with its own noise stream; results do
/// not depend on the thread count.
Translation translate(const AutoencoderModel& ae, const EnergyModel& model, const Tensor& x, const LangevinConfig& cfg,
                      std::uint64_t seed, std::size_t chunk_rows = 0);

/// Decodes z^0, z^stride, z^2stride, ...: floor(T / stride) + 1 frames.
std::vector<Tensor> decode_trajectory(const AutoencoderModel& ae, const Trajectory& traj, std::size_t stride);

/// Mean energy of a batch of codes.
double mean_energy(const EnergyModel& model, const Tensor& z);

void save_trajectory(const Trajectory& traj, const std::filesystem::path& base);
/// Throws FormatError on inconsistent contents.
Trajectory load_trajectory(const std::filesystem::path& base);

}  // namespace ltrans
