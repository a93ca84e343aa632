// SPDX-License-Identifier: Apache-2.0
#include "ltrans/commands.hpp"

#include <cmath>
#include <fstream>
#include <tuple>
#include <utility>

#include "ltrans/analytics.hpp"
#include "ltrans/checkpoint.hpp"
#include "ltrans/errors.hpp"
#include "ltrans/io.hpp"
#include "ltrans/pretrain.hpp"
#include "ltrans/transport.hpp"

namespace ltrans {

namespace fs = std::filesystem;

std::string to_string(Direction d) { return d == Direction::x2y ? "x2y" : "y2x"; }

Direction parse_direction(const std::string& name) {
  if (name == "x2y") return Direction::x2y;
  if (name == "y2x") return Direction::y2x;
  throw CommandError(kExitConfig, "direction must be x2y or y2x, got '" + name + "'");
}

namespace artifacts {
std::string ebm(Direction d) { return "ebm_" + to_string(d); }
std::string train_report(Direction d) { return "train_report_" + to_string(d) + ".csv"; }
std::string translated(Direction d) { return "translated_" + to_string(d); }
std::string trajectory(Direction d) { return "trajectory_" + to_string(d); }
}  // namespace artifacts

std::vector<std::string> metrics_headers() {
  return {"frechet_translated_target", "mmd2_translated_target", "frechet_source_target", "mmd2_source_target"};
}

namespace {

constexpr std::size_t kScatterSide = 96;
constexpr double kScatterExtent = 1.25;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void dump_config(const RunConfig& cfg, const fs::path& out, const std::string& command, CommandOutput& result) {
  const fs::path path = out / (command + ".config.json");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << to_json(cfg).dump(2) << '\n';
  if (!f) throw IoError("write failed for " + path.string());
  result.artifacts.push_back(path);
}

void add_checkpoint_paths(const fs::path& base, CommandOutput& result) {
  result.artifacts.push_back(manifest_path(base));
  result.artifacts.push_back(blob_path(base));
}

// Missing files are missing inputs (3); unreadable or inconsistent ones are
// corrupt artifacts (5).
Checkpoint load_input(const fs::path& base, const std::string& what) {
  if (!fs::exists(manifest_path(base)) || !fs::exists(blob_path(base))) {
    throw CommandError(kExitMissingData, what + " not found at " + base.string() + " (.json/.bin)");
  }
  try {
    return load_checkpoint(base);
  } catch (const FormatError& e) {
    throw CommandError(kExitCorruptArtifact, what + " is corrupt: " + e.what());
  } catch (const IoError& e) {
    throw CommandError(kExitCorruptArtifact, what + " is unreadable: " + e.what());
  }
}

template <class Fn>
auto decode_input(const std::string& what, Fn fn) {
  try {
    return fn();
  } catch (const FormatError& e) {
    throw CommandError(kExitCorruptArtifact, what + " is corrupt: " + e.what());
  } catch (const ContractError& e) {
    throw CommandError(kExitCorruptArtifact, what + " is corrupt: " + e.what());
  } catch (const DimensionError& e) {
    throw CommandError(kExitCorruptArtifact, what + " is corrupt: " + e.what());
  }
}

DomainDataset load_data(const fs::path& base, const std::string& what) {
  const Checkpoint ckpt = load_input(base, what);
  return decode_input(what, [&] { return dataset_from_checkpoint(ckpt); });
}

AutoencoderModel load_autoencoder(const fs::path& base) {
  const Checkpoint ckpt = load_input(base, "autoencoder checkpoint");
  return decode_input("autoencoder checkpoint", [&] { return autoencoder_from_checkpoint(ckpt); });
}

void require_data_dim(const AutoencoderModel& ae, const DomainDataset& ds, const std::string& what) {
  if (ae.data_dim() != ds.data_dim()) {
    throw CommandError(kExitModelMismatch, what + " has " + std::to_string(ds.data_dim()) +
                                               " features but the autoencoder expects " +
                                               std::to_string(ae.data_dim()));
  }
}

Tensor row_tensor(const Tensor& m, std::size_t i) {
  const auto r = m.row(i);
  return Tensor({r.size()}, std::vector<double>(r.begin(), r.end()));
}

std::vector<Tensor> head_rows(const Tensor& m, std::size_t count) {
  std::vector<Tensor> rows;
  for (std::size_t i = 0; i < std::min(count, m.rows()); ++i) rows.push_back(row_tensor(m, i));
  return rows;
}

std::uint64_t ebm_seed(const DerivedSeeds& s, Direction d) { return d == Direction::x2y ? s.ebm_x2y : s.ebm_y2x; }
std::uint64_t translate_seed(const DerivedSeeds& s, Direction d) {
  return d == Direction::x2y ? s.translate_x2y : s.translate_y2x;
}

}  // namespace

CommandOutput run_gen_data(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  ensure_dir(out);
  const DerivedSeeds seeds = derive_seeds(cfg.seed);
  DomainDataset x, y;
  if (cfg.data.kind == DataKind::pie) {
    auto spec = [&](const PieGeometry& g, std::uint64_t seed) {
      PieSpec s;
      s.center = g.center;
      s.inner = g.inner;
      s.outer = g.outer;
      s.start_deg = g.start_deg;
      s.sweep_deg = g.sweep_deg;
      s.count = cfg.data.count;
      s.seed = seed;
      return s;
    };
    std::tie(x, y) = gen_pies(spec(cfg.data.pie_x, seeds.data_x), spec(cfg.data.pie_y, seeds.data_y));
  } else {
    auto spec = [&](GlyphKind kind, std::uint64_t seed) {
      GlyphSpec s;
      s.side = cfg.data.glyph.side;
      s.kind = kind;
      s.position_jitter = cfg.data.glyph.position_jitter;
      s.scale_min = cfg.data.glyph.scale_min;
      s.scale_max = cfg.data.glyph.scale_max;
      s.intensity_min = cfg.data.glyph.intensity_min;
      s.intensity_max = cfg.data.glyph.intensity_max;
      s.count = cfg.data.count;
      s.seed = seed;
      return s;
    };
    std::tie(x, y) = gen_glyphs(spec(cfg.data.glyph_x, seeds.data_x), spec(cfg.data.glyph_y, seeds.data_y));
  }

  CommandOutput result;
  save_dataset(x, out / artifacts::kDataX);
  add_checkpoint_paths(out / artifacts::kDataX, result);
  save_dataset(y, out / artifacts::kDataY);
  add_checkpoint_paths(out / artifacts::kDataY, result);

  const fs::path preview = out / artifacts::kPreview;
  if (cfg.data.kind == DataKind::pie) {
    const std::vector<Tensor> panels{render_scatter(x.samples, kScatterSide, kScatterExtent),
                                     render_scatter(y.samples, kScatterSide, kScatterExtent)};
    write_image_grid(panels, kScatterSide, preview, 2);
  } else {
    const std::size_t half = std::max<std::size_t>(1, cfg.data.preview_count / 2);
    std::vector<Tensor> images = head_rows(x.samples, half);
    const std::size_t columns = images.size();
    for (auto& t : head_rows(y.samples, half)) images.push_back(std::move(t));
    write_image_grid(images, cfg.data.glyph.side, preview, columns);
  }
  result.artifacts.push_back(preview);
  dump_config(cfg, out, "gen-data", result);
  return result;
}

CommandOutput run_pretrain_ae(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out) {
  cfg.validate();
  const DomainDataset x = load_data(data_dir / artifacts::kDataX, "domain X cache");
  const DomainDataset y = load_data(data_dir / artifacts::kDataY, "domain Y cache");
  if (x.data_dim() != y.data_dim()) {
    throw CommandError(kExitModelMismatch, "domain caches have different feature counts");
  }
  ensure_dir(out);
  const DerivedSeeds seeds = derive_seeds(cfg.seed);
  RandomStream init(seeds.autoencoder);
  AutoencoderModel ae = make_autoencoder(x.data_dim(), cfg.ae.latent_dim, cfg.ae.hidden, cfg.ae.mode, cfg.ae.beta,
                                         cfg.ae.decoder_output, init);
  AeTrainConfig tc;
  tc.epochs = cfg.ae.epochs;
  tc.batch_size = cfg.ae.batch_size;
  tc.optimizer = cfg.ae.optimizer;
  const auto history = pretrain_autoencoder(ae, x, y, tc, seeds.autoencoder);

  CommandOutput result;
  const fs::path base = out / artifacts::kAutoencoder;
  save_checkpoint(to_checkpoint(ae), base);
  add_checkpoint_paths(base, result);

  CsvTable loss;
  const bool vae = cfg.ae.mode == AeMode::beta_vae;
  loss.headers = vae ? std::vector<std::string>{"epoch", "loss", "recon", "kl"}
                     : std::vector<std::string>{"epoch", "loss"};
  for (std::size_t e = 0; e < history.size(); ++e) {
    if (vae) {
      loss.rows.push_back({static_cast<double>(e), history[e].loss, history[e].recon, history[e].kl});
    } else {
      loss.rows.push_back({static_cast<double>(e), history[e].loss});
    }
  }
  write_csv(loss, out / artifacts::kAeLoss);
  result.artifacts.push_back(out / artifacts::kAeLoss);
  dump_config(cfg, out, "pretrain-ae", result);
  return result;
}

CommandOutput run_train_ebm(const RunConfig& cfg, const fs::path& ae_base, const fs::path& data_dir,
                            Direction direction, const fs::path& out) {
  cfg.validate();
  const AutoencoderModel ae = load_autoencoder(ae_base);
  const DomainDataset x = load_data(data_dir / artifacts::kDataX, "domain X cache");
  const DomainDataset y = load_data(data_dir / artifacts::kDataY, "domain Y cache");
  require_data_dim(ae, x, "domain X cache");
  require_data_dim(ae, y, "domain Y cache");
  ensure_dir(out);

  EbmTrainConfig tc;
  tc.hidden = cfg.ebm.hidden;
  tc.leaky_slope = cfg.ebm.leaky_slope;
  tc.optimizer = cfg.ebm.optimizer;
  tc.iterations = cfg.ebm.iterations;
  tc.batch_size = cfg.ebm.batch_size;
  tc.langevin = cfg.langevin_train;
  tc.langevin.record_trajectory = false;
  const bool forward = direction == Direction::x2y;
  EbmTrainResult trained;
  try {
    trained = train_ebm(ae, forward ? x : y, forward ? y : x, tc, ebm_seed(derive_seeds(cfg.seed), direction));
  } catch (const DivergedChainError& e) {
    throw CommandError(kExitFailure, std::string("energy training diverged: ") + e.what() +
                                         " (lower langevin_train.step_size or ebm.optimizer.learning_rate)");
  }

  CommandOutput result;
  Checkpoint ckpt = to_checkpoint(trained.model);
  ckpt.meta["direction"] = to_string(direction);
  const fs::path base = out / artifacts::ebm(direction);
  save_checkpoint(ckpt, base);
  add_checkpoint_paths(base, result);
  const fs::path report = out / artifacts::train_report(direction);
  write_csv(trained.report.to_csv(), report);
  result.artifacts.push_back(report);
  dump_config(cfg, out, "train-ebm-" + to_string(direction), result);
  return result;
}

CommandOutput run_translate(const RunConfig& cfg_in, const fs::path& ae_base, const fs::path& ebm_base,
                            const fs::path& input_base, const TranslateOptions& options, const fs::path& out) {
  RunConfig cfg = cfg_in;
  if (options.steps_override) cfg.langevin_translate.steps = *options.steps_override;
  if (options.noise) cfg.langevin_translate.noise_scale = *options.noise;
  if (options.stride) cfg.translate.frame_stride = *options.stride;
  // A zero-step override is allowed here: it yields plain reconstructions.
  if (cfg.langevin_translate.steps == 0) {
    RunConfig probe = cfg;
    probe.langevin_translate.steps = 1;
    probe.validate();
  } else {
    cfg.validate();
  }

  const AutoencoderModel ae = load_autoencoder(ae_base);
  const Checkpoint ebm_ckpt = load_input(ebm_base, "energy checkpoint");
  const EnergyModel ebm = decode_input("energy checkpoint", [&] { return energy_model_from_checkpoint(ebm_ckpt); });
  const DomainDataset input = load_data(input_base, "input cache");
  if (ae.latent_dim != ebm.latent_dim()) {
    throw CommandError(kExitModelMismatch, "autoencoder latent_dim " + std::to_string(ae.latent_dim) +
                                               " does not match energy input width " +
                                               std::to_string(ebm.latent_dim()));
  }
  require_data_dim(ae, input, "input cache");

  Direction direction = input.domain == Domain::x ? Direction::x2y : Direction::y2x;
  if (auto it = ebm_ckpt.meta.find("direction"); it != ebm_ckpt.meta.end() && it->is_string()) {
    direction = parse_direction(it->get<std::string>());
  }
  ensure_dir(out);

  LangevinConfig lc = cfg.langevin_translate;
  lc.record_trajectory = true;
  Translation tr;
  try {
    tr = translate(ae, ebm, input.samples, lc, translate_seed(derive_seeds(cfg.seed), direction),
                   cfg.translate.chunk_rows);
  } catch (const DivergedChainError& e) {
    throw CommandError(kExitFailure, std::string("translation chain diverged: ") + e.what());
  }
  tr.trajectory.direction = to_string(direction);

  CommandOutput result;
  const Domain target = direction == Direction::x2y ? Domain::y : Domain::x;
  DomainDataset translated = make_dataset(target, tr.output, input.image_mode, input.image_side);
  Checkpoint cache = dataset_to_checkpoint(translated);
  cache.add("source", input.samples);
  const fs::path base = out / artifacts::translated(direction);
  save_checkpoint(cache, base);
  add_checkpoint_paths(base, result);

  if (input.image_mode) {
    std::vector<Tensor> images = head_rows(input.samples, cfg.translate.grid_count);
    const std::size_t columns = images.size();
    for (auto& t : head_rows(tr.output, cfg.translate.grid_count)) images.push_back(std::move(t));
    const fs::path grid = base.string() + ".ppm";
    write_image_grid(images, input.image_side, grid, columns);
    result.artifacts.push_back(grid);
  } else {
    CsvTable points;
    for (std::size_t c = 0; c < input.data_dim(); ++c) points.headers.push_back("source_" + std::to_string(c));
    for (std::size_t c = 0; c < input.data_dim(); ++c) points.headers.push_back("translated_" + std::to_string(c));
    for (std::size_t r = 0; r < input.size(); ++r) {
      std::vector<double> row;
      for (std::size_t c = 0; c < input.data_dim(); ++c) row.push_back(input.samples.at(r, c));
      for (std::size_t c = 0; c < input.data_dim(); ++c) row.push_back(tr.output.at(r, c));
      points.rows.push_back(std::move(row));
    }
    const fs::path csv = base.string() + ".csv";
    write_csv(points, csv);
    result.artifacts.push_back(csv);
  }

  const fs::path traj_base = out / artifacts::trajectory(direction);
  save_trajectory(tr.trajectory, traj_base);
  add_checkpoint_paths(traj_base, result);

  if (cfg.translate.frame_stride > 0) {
    const auto frames = decode_trajectory(ae, tr.trajectory, cfg.translate.frame_stride);
    std::vector<Tensor> panels;
    std::size_t side = input.image_side;
    if (input.image_mode) {
      const std::size_t shown = std::min(cfg.translate.grid_count, input.size());
      for (std::size_t i = 0; i < shown; ++i) {
        for (const auto& f : frames) panels.push_back(row_tensor(f, i));
      }
    } else if (input.data_dim() == 2) {
      side = kScatterSide;
      for (const auto& f : frames) panels.push_back(render_scatter(f, kScatterSide, kScatterExtent));
    }
    if (!panels.empty()) {
      const fs::path strip = out / ("frames_" + to_string(direction) + ".ppm");
      write_image_grid(panels, side, strip, frames.size());
      result.artifacts.push_back(strip);
    }
  }
  dump_config(cfg, out, "translate-" + to_string(direction), result);
  return result;
}

CommandOutput run_analyze(const std::vector<fs::path>& trajectory_bases, const fs::path& out) {
  if (trajectory_bases.empty()) throw CommandError(kExitConfig, "analyze needs at least one trajectory");
  std::vector<Trajectory> trajs;
  for (const auto& base : trajectory_bases) {
    if (!fs::exists(manifest_path(base)) || !fs::exists(blob_path(base))) {
      throw CommandError(kExitMissingData, "trajectory not found at " + base.string() + " (.json/.bin)");
    }
    try {
      trajs.push_back(load_trajectory(base));
    } catch (const std::exception& e) {
      throw CommandError(kExitCorruptArtifact, "trajectory " + base.string() + " is corrupt: " + e.what());
    }
  }
  std::vector<ShiftProfile> profiles;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    try {
      profiles.push_back(shift_profile(trajs[i]));
    } catch (const ContractError& e) {
      throw CommandError(kExitCorruptArtifact,
                         "trajectory " + trajectory_bases[i].string() + " has no recorded gradients: " + e.what());
    }
  }
  const std::size_t dim = profiles.front().latent_dim();
  for (const auto& p : profiles) {
    if (p.latent_dim() != dim) throw CommandError(kExitModelMismatch, "trajectories disagree on latent_dim");
  }
  ensure_dir(out);
  CommandOutput result;
  export_heatmap(profiles, out / artifacts::kHeatmap);
  result.artifacts.push_back(out / artifacts::kHeatmap);

  const ShiftProfile* fwd = nullptr;
  const ShiftProfile* bwd = nullptr;
  for (const auto& p : profiles) {
    if (p.direction == "x2y" && !fwd) fwd = &p;
    if (p.direction == "y2x" && !bwd) bwd = &p;
  }
  if (fwd && bwd) {
    double score = 0.0;
    try {
      score = mutual_inverse_score(*fwd, *bwd);
    } catch (const DomainError& e) {
      throw CommandError(kExitMetricPrecondition, std::string("mutual-inverse score undefined: ") + e.what());
    }
    write_csv({{score}}, {"mutual_inverse_score"}, out / artifacts::kMutualInverse);
    result.artifacts.push_back(out / artifacts::kMutualInverse);
  } else {
    result.warnings.push_back("only one translation direction given; mutual-inverse score skipped");
  }

  // direction: 0 = x2y, 1 = y2x, -1 = untagged
  CsvTable gap;
  gap.headers = {"direction", "energy_start", "energy_end", "energy_drop"};
  for (const auto& t : trajs) {
    auto mean_at = [&](std::size_t step) {
      const auto e = t.energies_at(step);
      double s = 0.0;
      for (double v : e) s += v;
      return s / static_cast<double>(e.size());
    };
    const double start = mean_at(0);
    const double end = mean_at(t.steps);
    const double code = t.direction == "x2y" ? 0.0 : t.direction == "y2x" ? 1.0 : -1.0;
    gap.rows.push_back({code, start, end, start - end});
  }
  write_csv(gap, out / artifacts::kEnergyGap);
  result.artifacts.push_back(out / artifacts::kEnergyGap);
  return result;
}

CommandOutput run_eval(const fs::path& ae_base, const fs::path& translated_base, const fs::path& target_base,
                       const fs::path& out) {
  const AutoencoderModel ae = load_autoencoder(ae_base);
  const Checkpoint tr_ckpt = load_input(translated_base, "translated cache");
  const Checkpoint tg_ckpt = load_input(target_base, "target cache");
  if (!tr_ckpt.contains("source")) {
    throw CommandError(kExitCorruptArtifact, "translated cache has no 'source' tensor");
  }
  // Checked before decoding: a one-row cache is otherwise rejected as corrupt.
  const std::pair<const Checkpoint*, const char*> sized[] = {
      {&tr_ckpt, "samples"}, {&tr_ckpt, "source"}, {&tg_ckpt, "samples"}};
  for (const auto& [ckpt, name] : sized) {
    if (ckpt->contains(name) && ckpt->get(name).rows() < 2) {
      throw CommandError(kExitMetricPrecondition, "metrics need at least 2 samples in every set");
    }
  }
  const DomainDataset translated = decode_input("translated cache", [&] { return dataset_from_checkpoint(tr_ckpt); });
  const DomainDataset target = decode_input("target cache", [&] { return dataset_from_checkpoint(tg_ckpt); });
  const Tensor source = tr_ckpt.get("source");
  require_data_dim(ae, translated, "translated cache");
  require_data_dim(ae, target, "target cache");
  if (source.rank() != 2 || source.cols() != ae.data_dim()) {
    throw CommandError(kExitModelMismatch, "source tensor width does not match the autoencoder");
  }
  ensure_dir(out);

  NoGradGuard no_grad;
  const Tensor f_tr = encode_mean(ae, translated.samples);
  const Tensor f_tg = encode_mean(ae, target.samples);
  const Tensor f_src = encode_mean(ae, source);
  std::vector<double> row;
  try {
    const GaussianFit g_tg = fit_gaussian(f_tg);
    row = {frechet_distance(fit_gaussian(f_tr), g_tg), kid_mmd(f_tr, f_tg), frechet_distance(fit_gaussian(f_src), g_tg),
           kid_mmd(f_src, f_tg)};
  } catch (const DomainError& e) {
    throw CommandError(kExitMetricPrecondition, std::string("metric undefined: ") + e.what());
  } catch (const ContractError& e) {
    throw CommandError(kExitMetricPrecondition, std::string("metric precondition failed: ") + e.what());
  }
  CommandOutput result;
  write_csv({row}, metrics_headers(), out / artifacts::kMetrics);
  result.artifacts.push_back(out / artifacts::kMetrics);

  const Domain source_domain = target.domain == Domain::x ? Domain::y : Domain::x;
  const std::vector<DomainDataset> sets{make_dataset(source_domain, source, target.image_mode, target.image_side),
                                        target};
  write_csv(mse_table_csv(recon_mse_table(ae, sets)), out / artifacts::kReconMse);
  result.artifacts.push_back(out / artifacts::kReconMse);
  return result;
}

}  // namespace ltrans
