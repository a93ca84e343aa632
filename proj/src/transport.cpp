// SPDX-License-Identifier: Apache-2.0
#include "ltrans/transport.hpp"

#include <chrono>
#include <cmath>

#include "ltrans/checkpoint.hpp"
#include "ltrans/errors.hpp"
#include "ltrans/ops.hpp"

namespace ltrans {

std::string to_string(StepDecay d) { return d == StepDecay::constant ? "constant" : "polynomial"; }

StepDecay parse_step_decay(const std::string& name) {
  if (name == "constant") return StepDecay::constant;
  if (name == "polynomial") return StepDecay::polynomial;
  throw ContractError("unknown step decay '" + name + "'");
}

void LangevinConfig::validate() const {
  if (!(step_size > 0.0)) throw ContractError("Langevin step size must be positive");
  if (!(noise_scale >= 0.0)) throw ContractError("Langevin noise scale must be non-negative");
  if (decay == StepDecay::polynomial) {
    if (!(decay_offset >= 1.0)) throw ContractError("polynomial decay offset must be >= 1");
    if (!(decay_gamma >= 0.0)) throw ContractError("polynomial decay exponent must be >= 0");
  }
}

double LangevinConfig::step_size_at(std::size_t t) const {
  if (decay == StepDecay::constant) return step_size;
  return step_size * std::pow(decay_offset + static_cast<double>(t), -decay_gamma);
}

Tensor Trajectory::latent_at(std::size_t t) const {
  if (t > steps) throw ContractError("trajectory step out of range");
  const std::size_t block = batch * dim;
  return Tensor({batch, dim}, std::vector<double>(latents.begin() + t * block, latents.begin() + (t + 1) * block));
}

Tensor Trajectory::gradient_at(std::size_t t) const {
  if (t >= steps) throw ContractError("trajectory gradient step out of range");
  const std::size_t block = batch * dim;
  return Tensor({batch, dim},
                std::vector<double>(gradients.begin() + t * block, gradients.begin() + (t + 1) * block));
}

std::span<const double> Trajectory::energies_at(std::size_t t) const {
  if (t > steps) throw ContractError("trajectory step out of range");
  return std::span<const double>(energies).subspan(t * batch, batch);
}

void Trajectory::validate() const {
  const std::size_t block = batch * dim;
  if (batch == 0 || dim == 0) throw FormatError("trajectory has an empty batch or dimension");
  if (latents.size() != (steps + 1) * block) throw FormatError("trajectory latents have the wrong size");
  if (gradients.size() != steps * block) throw FormatError("trajectory gradients have the wrong size");
  if (energies.size() != (steps + 1) * batch) throw FormatError("trajectory energies have the wrong size");
  if (step_sizes.size() != steps) throw FormatError("trajectory step sizes have the wrong size");
  if (chunk_rows == 0 || noise_keys.size() != (batch + chunk_rows - 1) / chunk_rows) {
    throw FormatError("trajectory noise chunks are inconsistent");
  }
}

namespace {

void check_energies(std::span<const double> e, std::size_t step) {
  for (double v : e) {
    if (!std::isfinite(v)) throw DivergedChainError("non-finite energy", step);
    if (std::abs(v) > kEnergyLimit) throw DivergedChainError("energy magnitude above limit", step);
  }
}

Tensor evaluate_energy(const EnergyFn& energy, const Tensor& z) {
  Tensor e = energy(z);
  if (e.numel() != z.rows()) {
    throw DimensionError("energy function must return one value per row, got " + shape_string(e.shape()));
  }
  return e;
}

}  // namespace

ChainResult langevin_sample(const EnergyFn& energy, const Tensor& z0, const LangevinConfig& cfg,
                            std::uint64_t noise_key) {
  cfg.validate();
  if (z0.rank() != 2) throw DimensionError("Langevin start must be [batch x dim], got " + shape_string(z0.shape()));
  for (double v : z0.data()) {
    if (!std::isfinite(v)) throw ContractError("Langevin start contains a non-finite value");
  }
  const std::size_t batch = z0.rows();
  const std::size_t dim = z0.cols();
  const std::size_t block = batch * dim;
  RandomStream noise(noise_key);
  std::vector<double> z(z0.data().begin(), z0.data().end());

  std::optional<Trajectory> traj;
  if (cfg.record_trajectory) {
    traj.emplace();
    traj->steps = cfg.steps;
    traj->batch = batch;
    traj->dim = dim;
    traj->noise_scale = cfg.noise_scale;
    traj->noise_keys = {noise_key};
    traj->chunk_rows = batch;
    traj->latents.reserve((cfg.steps + 1) * block);
    traj->latents.insert(traj->latents.end(), z.begin(), z.end());
    traj->gradients.reserve(cfg.steps * block);
  }

  // Callers may sit inside a NoGradGuard; the chain still needs dE/dz.
  EnableGradGuard grad_on;
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    Tensor zt({batch, dim}, z, true);
    const Tensor e = evaluate_energy(energy, zt);
    check_energies(e.data(), t);
    const Tensor g = gradients(sum(e), std::span<const Tensor>(&zt, 1))[0];
    const auto gv = g.data();
    for (double v : gv) {
      if (!std::isfinite(v)) throw DivergedChainError("non-finite energy gradient", t);
    }
    const double eta = cfg.step_size_at(t);
    const double drift = 0.5 * eta;
    const double diffusion = std::sqrt(eta) * cfg.noise_scale;
    for (std::size_t i = 0; i < block; ++i) {
      const double eps = diffusion > 0.0 ? noise.normal() : 0.0;
      z[i] = z[i] - drift * gv[i] + diffusion * eps;
      if (!std::isfinite(z[i]) || std::abs(z[i]) > kLatentLimit) {
        throw DivergedChainError("latent code left the finite range", t + 1);
      }
    }
    if (traj) {
      traj->energies.insert(traj->energies.end(), e.data().begin(), e.data().end());
      traj->gradients.insert(traj->gradients.end(), gv.begin(), gv.end());
      traj->latents.insert(traj->latents.end(), z.begin(), z.end());
      traj->step_sizes.push_back(eta);
    }
  }

  Tensor z_final({batch, dim}, std::move(z));
  if (traj) {
    NoGradGuard no_grad;
    const Tensor e = evaluate_energy(energy, z_final);
    check_energies(e.data(), cfg.steps);
    traj->energies.insert(traj->energies.end(), e.data().begin(), e.data().end());
  }
  return ChainResult{z_final, std::move(traj)};
}

ChainResult langevin_sample(const EnergyModel& model, const Tensor& z0, const LangevinConfig& cfg,
                            std::uint64_t noise_key) {
  if (z0.rank() == 2 && z0.cols() != model.latent_dim()) {
    throw DimensionError("codes have width " + std::to_string(z0.cols()) + " but the energy expects " +
                         std::to_string(model.latent_dim()));
  }
  return langevin_sample([&model](const Tensor& z) { return model.energy(z); }, z0, cfg, noise_key);
}

std::vector<double> replay_latents(const Trajectory& traj) {
  traj.validate();
  const std::size_t block = traj.batch * traj.dim;
  std::vector<RandomStream> noise;
  for (std::uint64_t key : traj.noise_keys) noise.emplace_back(key);
  std::vector<double> out(traj.latents.begin(), traj.latents.begin() + block);
  std::vector<double> z = out;
  for (std::size_t t = 0; t < traj.steps; ++t) {
    const double eta = traj.step_sizes[t];
    const double drift = 0.5 * eta;
    const double diffusion = std::sqrt(eta) * traj.noise_scale;
    const double* g = traj.gradients.data() + t * block;
    for (std::size_t c = 0; c < noise.size(); ++c) {
      const std::size_t begin = c * traj.chunk_rows * traj.dim;
      const std::size_t end = std::min(block, begin + traj.chunk_rows * traj.dim);
      for (std::size_t i = begin; i < end; ++i) {
        const double eps = diffusion > 0.0 ? noise[c].normal() : 0.0;
        z[i] = z[i] - drift * g[i] + diffusion * eps;
      }
    }
    out.insert(out.end(), z.begin(), z.end());
  }
  return out;
}

void TrainReport::append(const TrainRow& row, double seconds) {
  pos_energy.push_back(row.pos_energy);
  neg_energy.push_back(row.neg_energy);
  gap.push_back(row.gap);
  wall_seconds.push_back(seconds);
}

CsvTable TrainReport::to_csv() const {
  CsvTable table;
  table.headers = {"iteration", "pos_energy", "neg_energy", "gap"};
  for (std::size_t i = 0; i < size(); ++i) {
    table.rows.push_back({static_cast<double>(i), pos_energy[i], neg_energy[i], gap[i]});
  }
  return table;
}

EbmStep ebm_grad_step(EnergyModel& model, const Tensor& z_pos, const Tensor& z_neg_init, const LangevinConfig& cfg,
                      Optimizer& opt, std::uint64_t noise_key) {
  if (z_pos.rank() != 2 || z_neg_init.rank() != 2 || z_pos.cols() != z_neg_init.cols()) {
    throw DimensionError("positive and negative codes must be matrices of equal width");
  }
  LangevinConfig chain_cfg = cfg;
  chain_cfg.record_trajectory = false;
  const ChainResult chain = langevin_sample(model, z_neg_init, chain_cfg, noise_key);

  auto params = model.parameters();
  zero_grads(params);
  const Tensor pos = mean(model.energy(z_pos.detach()));
  const Tensor neg = mean(model.energy(chain.z));
  const Tensor loss = pos - neg;
  backward(loss);
  opt.step(params);

  EbmStep step;
  step.row.pos_energy = pos.item();
  step.row.neg_energy = neg.item();
  step.row.gap = loss.item();
  step.negatives = chain.z;
  return step;
}

namespace {
Tensor encode_all(const AutoencoderModel& ae, const Tensor& u) {
  NoGradGuard no_grad;
  return encode_mean(ae, u).detach();
}
}  // namespace

EbmTrainResult train_ebm(const AutoencoderModel& ae, const DomainDataset& source, const DomainDataset& target,
                         const EbmTrainConfig& cfg, std::uint64_t seed) {
  if (cfg.iterations < 1) throw ContractError("EBM training needs at least one iteration");
  if (cfg.langevin.steps < 1) throw ContractError("EBM training needs at least one Langevin step");
  if (source.data_dim() != target.data_dim() || source.data_dim() != ae.data_dim()) {
    throw DimensionError("datasets and autoencoder disagree on the data dimension");
  }
  auto init_rng = RandomStream::named(seed, streams::kInit, 1);
  EbmTrainResult result{make_energy_model(ae.latent_dim, cfg.hidden, init_rng, cfg.leaky_slope), {}};

  const DomainDataset codes_source = make_dataset(source.domain, encode_all(ae, source.samples));
  const DomainDataset codes_target = make_dataset(target.domain, encode_all(ae, target.samples));
  BatchStream source_batches(codes_source, cfg.batch_size, mix64(seed ^ 0x5eedULL));
  BatchStream target_batches(codes_target, cfg.batch_size, mix64(seed ^ 0x7a7eULL));

  Optimizer opt(cfg.optimizer);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    const Tensor z_neg = source_batches.next();
    const Tensor z_pos = target_batches.next();
    const auto key = RandomStream::named(seed, streams::kLangevinNoise, it).key();
    const EbmStep step = ebm_grad_step(result.model, z_pos, z_neg, cfg.langevin, opt, key);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    result.report.append(step.row, elapsed.count());
  }
  return result;
}

Translation translate(const AutoencoderModel& ae, const EnergyModel& model, const Tensor& x, const LangevinConfig& cfg,
                      std::uint64_t seed, std::size_t chunk_rows) {
  if (ae.latent_dim != model.latent_dim()) {
    throw DimensionError("autoencoder latent_dim " + std::to_string(ae.latent_dim) + " differs from energy input " +
                         std::to_string(model.latent_dim()));
  }
  const Tensor z0 = encode_all(ae, x);
  const std::size_t batch = z0.rows();
  const std::size_t dim = z0.cols();
  if (chunk_rows == 0 || chunk_rows > batch) chunk_rows = batch;
  const std::size_t chunks = (batch + chunk_rows - 1) / chunk_rows;

  LangevinConfig chain_cfg = cfg;
  chain_cfg.record_trajectory = true;
  if (cfg.steps == 0) chain_cfg.steps = 0;

  std::vector<Trajectory> parts(chunks);
  std::vector<std::uint64_t> keys(chunks);
  for (std::size_t c = 0; c < chunks; ++c) keys[c] = RandomStream::named(seed, streams::kLangevinNoise, c).key();

  // Each chunk builds its own tape; parameters are only read.
  std::exception_ptr failure;
  const auto n_chunks = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(dynamic) if (chunks > 1)
  for (std::ptrdiff_t c = 0; c < n_chunks; ++c) {
    try {
      const std::size_t begin = static_cast<std::size_t>(c) * chunk_rows;
      const std::size_t end = std::min(batch, begin + chunk_rows);
      std::vector<std::size_t> rows;
      for (std::size_t r = begin; r < end; ++r) rows.push_back(r);
      auto chain = langevin_sample(model, z0.select_rows(rows), chain_cfg, keys[c]);
      parts[c] = std::move(*chain.trajectory);
    } catch (...) {
#pragma omp critical(ltrans_translate_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  Trajectory traj;
  traj.steps = chain_cfg.steps;
  traj.batch = batch;
  traj.dim = dim;
  traj.noise_scale = cfg.noise_scale;
  traj.noise_keys = keys;
  traj.chunk_rows = chunk_rows;
  traj.step_sizes = parts.front().step_sizes;
  for (std::size_t t = 0; t <= traj.steps; ++t) {
    for (const auto& p : parts) {
      const std::size_t pb = p.batch * dim;
      traj.latents.insert(traj.latents.end(), p.latents.begin() + t * pb, p.latents.begin() + (t + 1) * pb);
      traj.energies.insert(traj.energies.end(), p.energies.begin() + t * p.batch,
                           p.energies.begin() + (t + 1) * p.batch);
      if (t < traj.steps) {
        traj.gradients.insert(traj.gradients.end(), p.gradients.begin() + t * pb, p.gradients.begin() + (t + 1) * pb);
      }
    }
  }

  Translation out;
  {
    NoGradGuard no_grad;
    out.output = decode(ae, traj.latent_at(traj.steps)).detach();
  }
  out.trajectory = std::move(traj);
  return out;
}

std::vector<Tensor> decode_trajectory(const AutoencoderModel& ae, const Trajectory& traj, std::size_t stride) {
  if (stride < 1) throw ContractError("frame stride must be at least 1");
  NoGradGuard no_grad;
  std::vector<Tensor> frames;
  for (std::size_t t = 0; t <= traj.steps; t += stride) frames.push_back(decode(ae, traj.latent_at(t)).detach());
  return frames;
}

double mean_energy(const EnergyModel& model, const Tensor& z) {
  NoGradGuard no_grad;
  return mean(model.energy(z)).item();
}

void save_trajectory(const Trajectory& traj, const std::filesystem::path& base) {
  traj.validate();
  Checkpoint ckpt;
  std::vector<std::string> keys;
  for (std::uint64_t k : traj.noise_keys) keys.push_back(std::to_string(k));
  ckpt.meta = nlohmann::json{{"kind", "trajectory"},
                             {"steps", traj.steps},
                             {"batch", traj.batch},
                             {"dim", traj.dim},
                             {"noise_scale", traj.noise_scale},
                             {"noise_keys", keys},
                             {"chunk_rows", traj.chunk_rows},
                             {"direction", traj.direction}};
  ckpt.add("latents", Tensor({traj.steps + 1, traj.batch, traj.dim}, traj.latents));
  ckpt.add("energies", Tensor({traj.steps + 1, traj.batch}, traj.energies));
  if (traj.steps > 0) {
    ckpt.add("gradients", Tensor({traj.steps, traj.batch, traj.dim}, traj.gradients));
    ckpt.add("step_sizes", Tensor({traj.steps}, traj.step_sizes));
  }
  save_checkpoint(ckpt, base);
}

Trajectory load_trajectory(const std::filesystem::path& base) {
  const Checkpoint ckpt = load_checkpoint(base);
  Trajectory traj;
  try {
    if (ckpt.meta.at("kind").get<std::string>() != "trajectory") throw FormatError("file is not a trajectory");
    traj.steps = ckpt.meta.at("steps").get<std::size_t>();
    traj.batch = ckpt.meta.at("batch").get<std::size_t>();
    traj.dim = ckpt.meta.at("dim").get<std::size_t>();
    traj.noise_scale = ckpt.meta.at("noise_scale").get<double>();
    for (const auto& k : ckpt.meta.at("noise_keys")) traj.noise_keys.push_back(std::stoull(k.get<std::string>()));
    traj.chunk_rows = ckpt.meta.at("chunk_rows").get<std::size_t>();
    traj.direction = ckpt.meta.at("direction").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trajectory metadata is malformed: ") + e.what());
  } catch (const std::logic_error& e) {
    throw FormatError(std::string("trajectory metadata is malformed: ") + e.what());
  }
  auto grab = [&](const char* name) {
    const auto d = ckpt.get(name).data();
    return std::vector<double>(d.begin(), d.end());
  };
  traj.latents = grab("latents");
  traj.energies = grab("energies");
  if (traj.steps > 0) {
    traj.gradients = grab("gradients");
    traj.step_sizes = grab("step_sizes");
  }
  traj.validate();
  return traj;
}

}  // namespace ltrans
