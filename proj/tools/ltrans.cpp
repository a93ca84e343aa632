// SPDX-License-Identifier: Apache-2.0
//
// ltrans: command-line front end for the latent transport pipeline.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltrans/commands.hpp"
#include "ltrans/errors.hpp"

namespace fs = std::filesystem;
using namespace ltrans;

namespace {

struct ConfigArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "Run config (JSON); defaults apply when omitted");
    cmd->add_option("--set", overrides, "Override a config field, e.g. --set ae.latent_dim=16")->take_all();
    cmd->add_option("--out", out, "Output directory (default: the config's output_dir)");
  }

  RunConfig load() const {
    std::optional<fs::path> path;
    if (!config.empty()) path = config;
    return load_run_config(path, overrides);
  }

  fs::path out_dir(const RunConfig& cfg) const {
    return resolve_output_dir(cfg, out.empty() ? std::nullopt : std::optional<fs::path>(out));
  }
};

// Accepts either a checkpoint base or one of its two files.
fs::path as_base(const std::string& arg) {
  fs::path p(arg);
  if (p.extension() == ".json" || p.extension() == ".bin") p.replace_extension();
  return p;
}

fs::path under_root(const std::string& arg) {
  RunConfig probe;
  return resolve_output_dir(probe, fs::path(arg));
}

void report(const CommandOutput& out) {
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& p : out.artifacts) std::cout << p.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unpaired domain translation by latent energy transport"};
  app.require_subcommand(1);

  ConfigArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "Generate both domain caches and a preview image");
  gen_args.attach(gen);

  ConfigArgs ae_args;
  std::string ae_data;
  auto* pre = app.add_subcommand("pretrain-ae", "Pretrain the autoencoder on the union of both domains");
  ae_args.attach(pre);
  pre->add_option("--data", ae_data, "Directory holding data_x/data_y (default: output directory)");

  ConfigArgs ebm_args;
  std::string ebm_ae, ebm_data, ebm_direction;
  auto* ebm = app.add_subcommand("train-ebm", "Train one direction's latent energy");
  ebm_args.attach(ebm);
  ebm->add_option("--ae-checkpoint", ebm_ae, "Autoencoder checkpoint base (default: <out>/ae)");
  ebm->add_option("--data", ebm_data, "Directory holding data_x/data_y (default: output directory)");
  ebm->add_option("--direction", ebm_direction, "x2y or y2x")->required();

  ConfigArgs tr_args;
  std::string tr_ae, tr_ebm, tr_input;
  std::optional<std::size_t> steps_override, stride;
  std::optional<double> noise;
  auto* tr = app.add_subcommand("translate", "Transport source codes down the energy and decode");
  tr_args.attach(tr);
  tr->add_option("--ae", tr_ae, "Autoencoder checkpoint base")->required();
  tr->add_option("--ebm", tr_ebm, "Energy checkpoint base")->required();
  tr->add_option("--input", tr_input, "Source dataset cache base")->required();
  tr->add_option("--steps-override", steps_override, "Langevin steps (0 returns reconstructions)");
  tr->add_option("--noise", noise, "Noise scale for the translation chain");
  tr->add_option("--stride", stride, "Frame strip stride in steps (0 disables)");

  std::vector<std::string> an_trajs;
  std::string an_out;
  auto* an = app.add_subcommand("analyze", "Latent shift heatmap, mutual-inverse score, energy report");
  an->add_option("--trajectories", an_trajs, "Trajectory bases")->required()->take_all();
  an->add_option("--out", an_out, "Output directory")->required();

  std::string ev_ae, ev_translated, ev_target, ev_out;
  auto* ev = app.add_subcommand("eval", "Frechet distance and MMD on encoder features");
  ev->add_option("--ae", ev_ae, "Autoencoder checkpoint base")->required();
  ev->add_option("--translated", ev_translated, "Translated cache base")->required();
  ev->add_option("--target-data", ev_target, "Target dataset cache base")->required();
  ev->add_option("--out", ev_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) {
      const RunConfig cfg = gen_args.load();
      report(run_gen_data(cfg, gen_args.out_dir(cfg)));
    } else if (pre->parsed()) {
      const RunConfig cfg = ae_args.load();
      const fs::path out = ae_args.out_dir(cfg);
      report(run_pretrain_ae(cfg, ae_data.empty() ? out : under_root(ae_data), out));
    } else if (ebm->parsed()) {
      const RunConfig cfg = ebm_args.load();
      const fs::path out = ebm_args.out_dir(cfg);
      const Direction dir = parse_direction(ebm_direction);
      const fs::path ae = ebm_ae.empty() ? out / artifacts::kAutoencoder : under_root(as_base(ebm_ae).string());
      report(run_train_ebm(cfg, ae, ebm_data.empty() ? out : under_root(ebm_data), dir, out));
    } else if (tr->parsed()) {
      const RunConfig cfg = tr_args.load();
      TranslateOptions opts{steps_override, noise, stride};
      report(run_translate(cfg, under_root(as_base(tr_ae).string()), under_root(as_base(tr_ebm).string()),
                           under_root(as_base(tr_input).string()), opts, tr_args.out_dir(cfg)));
    } else if (an->parsed()) {
      std::vector<fs::path> bases;
      for (const auto& t : an_trajs) bases.push_back(under_root(as_base(t).string()));
      report(run_analyze(bases, under_root(an_out)));
    } else if (ev->parsed()) {
      report(run_eval(under_root(as_base(ev_ae).string()), under_root(as_base(ev_translated).string()),
                      under_root(as_base(ev_target).string()), under_root(ev_out)));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CommandError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
