// SPDX-License-Identifier: Apache-2.0
//
// Pipeline stages and the ltrans binary's exit codes.
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "helpers.hpp"
#include "ltrans/checkpoint.hpp"
#include "ltrans/commands.hpp"
#include "ltrans/errors.hpp"
#include "ltrans/data.hpp"
#include "ltrans/io.hpp"
#include "ltrans/nets.hpp"
#include "ltrans/transport.hpp"

using namespace ltrans;
namespace fs = std::filesystem;
using ltrans::test::ScratchDir;

namespace {

RunConfig small_pie() {
  RunConfig cfg = default_run_config(DataKind::pie);
  cfg.data.count = 200;
  cfg.ae.epochs = 40;
  cfg.ebm.iterations = 60;
  cfg.translate.chunk_rows = 64;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int expect_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const CommandError& e) {
    return e.code();
  } catch (const ConfigError&) {
    return kExitConfig;
  }
  return kExitOk;
}

// Runs the CLI and returns its exit status.
int cli(const std::string& args) {
  const std::string cmd = std::string(LTRANS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli_output(const std::string& args, int& code) {
  const std::string cmd = std::string(LTRANS_CLI_PATH) + " " + args + " 2>&1";
  std::string out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  char buf[512];
  while (std::fgets(buf, sizeof(buf), pipe)) out += buf;
  const int status = ::pclose(pipe);
  code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

// One small pipeline shared by the cases below.
struct Pipeline {
  ScratchDir dir{"pipeline"};
  RunConfig cfg = small_pie();
  std::uint64_t ae_checksum_before = 0;
  std::uint64_t ae_checksum_after = 0;

  Pipeline() {
    const fs::path out = dir.path();
    run_gen_data(cfg, out);
    run_pretrain_ae(cfg, out, out);
    ae_checksum_before = checkpoint_checksum(out / "ae");
    run_train_ebm(cfg, out / "ae", out, Direction::x2y, out);
    run_train_ebm(cfg, out / "ae", out, Direction::y2x, out);
    ae_checksum_after = checkpoint_checksum(out / "ae");
    run_translate(cfg, out / "ae", out / "ebm_x2y", out / "data_x", {}, out);
    run_translate(cfg, out / "ae", out / "ebm_y2x", out / "data_y", {}, out);
  }
  fs::path operator/(const std::string& name) const { return dir / name; }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("gen-data writes two caches and a preview, deterministically") {
  ScratchDir a("gen-a"), b("gen-b");
  const RunConfig cfg = small_pie();
  const auto out = run_gen_data(cfg, a.path());
  std::size_t caches = 0, images = 0;
  for (const auto& p : out.artifacts) {
    CHECK(fs::exists(p));
    if (p.extension() == ".bin") ++caches;
    if (p.extension() == ".ppm") ++images;
  }
  CHECK(caches == 2);
  CHECK(images == 1);
  CHECK(fs::exists(a / "gen-data.config.json"));
  run_gen_data(cfg, b.path());
  for (const char* f : {"data_x.json", "data_x.bin", "data_y.json", "data_y.bin", "preview.ppm"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  RunConfig other = cfg;
  other.seed = 2;
  ScratchDir c("gen-c");
  run_gen_data(other, c.path());
  CHECK(slurp(a / "data_x.bin") != slurp(c / "data_x.bin"));
}

TEST_CASE("dumped config reproduces the run") {
  ScratchDir a("dump-a"), b("dump-b");
  run_gen_data(small_pie(), a.path());
  const RunConfig again = load_run_config(a / "gen-data.config.json");
  run_gen_data(again, b.path());
  CHECK(slurp(a / "data_y.bin") == slurp(b / "data_y.bin"));
  CHECK(slurp(a / "gen-data.config.json") == slurp(b / "gen-data.config.json"));
}

TEST_CASE("pretrain-ae with zero epochs keeps the initialization") {
  ScratchDir dir("ae0");
  RunConfig cfg = small_pie();
  cfg.ae.epochs = 0;
  run_gen_data(cfg, dir.path());
  run_pretrain_ae(cfg, dir.path(), dir.path());
  const auto saved = autoencoder_from_checkpoint(load_checkpoint(dir / "ae"));
  RandomStream init(derive_seeds(cfg.seed).autoencoder);
  const auto fresh =
      make_autoencoder(2, cfg.ae.latent_dim, cfg.ae.hidden, cfg.ae.mode, cfg.ae.beta, cfg.ae.decoder_output, init);
  const auto ps = saved.parameters();
  const auto pf = fresh.parameters();
  REQUIRE(ps.size() == pf.size());
  for (std::size_t k = 0; k < ps.size(); ++k) {
    CHECK(std::vector<double>(ps[k].data().begin(), ps[k].data().end()) ==
          std::vector<double>(pf[k].data().begin(), pf[k].data().end()));
  }
  CHECK(read_csv(dir / "ae_loss.csv").rows.empty());
}

TEST_CASE("pretrain-ae loss curve") {
  const auto loss = read_csv(pipeline() / "ae_loss.csv");
  CHECK(loss.headers == std::vector<std::string>{"epoch", "loss", "recon", "kl"});
  REQUIRE(loss.rows.size() == 40);
  CHECK(loss.rows.back()[1] < 0.5 * loss.rows.front()[1]);

  ScratchDir dir("plain");
  RunConfig cfg = small_pie();
  cfg.ae.mode = AeMode::plain;
  cfg.ae.epochs = 3;
  run_gen_data(cfg, dir.path());
  run_pretrain_ae(cfg, dir.path(), dir.path());
  CHECK(read_csv(dir / "ae_loss.csv").headers == std::vector<std::string>{"epoch", "loss"});
}

// The report's pos - neg column hovers around zero once the chain keeps up,
// so the gap is measured between encoded target and source codes.
double code_gap(const Pipeline& p, const fs::path& ebm, Direction d) {
  const auto ae = autoencoder_from_checkpoint(load_checkpoint(p / "ae"));
  const auto e = energy_model_from_checkpoint(load_checkpoint(ebm));
  NoGradGuard ng;
  const Tensor zx = encode_mean(ae, load_dataset(p / "data_x").samples);
  const Tensor zy = encode_mean(ae, load_dataset(p / "data_y").samples);
  return d == Direction::x2y ? mean_energy(e, zy) - mean_energy(e, zx) : mean_energy(e, zx) - mean_energy(e, zy);
}

TEST_CASE("train-ebm leaves the autoencoder untouched and closes the gap") {
  auto& p = pipeline();
  CHECK(p.ae_checksum_before == p.ae_checksum_after);
  for (Direction d : {Direction::x2y, Direction::y2x}) {
    const std::string dir = to_string(d);
    CAPTURE(dir);
    const auto report = read_csv(p / ("train_report_" + dir + ".csv"));
    CHECK(report.headers == std::vector<std::string>{"iteration", "pos_energy", "neg_energy", "gap"});
    REQUIRE(report.rows.size() == 60);
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      CHECK(report.rows[i][0] == static_cast<double>(i));
      CHECK(report.rows[i][3] == doctest::Approx(report.rows[i][1] - report.rows[i][2]).epsilon(1e-12));
    }
    const auto ckpt = load_checkpoint(p / ("ebm_" + dir));
    CHECK(ckpt.meta.at("direction") == dir);

    ScratchDir early("ebm1");
    RunConfig one = p.cfg;
    one.ebm.iterations = 1;
    run_train_ebm(one, p / "ae", p.dir.path(), d, early.path());
    const double initial = code_gap(p, early / ("ebm_" + dir), d);
    const double final_gap = code_gap(p, p / ("ebm_" + dir), d);
    MESSAGE(dir << " target-minus-source energy: after 1 iteration " << initial << ", after 60 " << final_gap);
    CHECK(final_gap < initial);
    CHECK(final_gap < 0.0);
  }
}

TEST_CASE("translate outputs") {
  auto& p = pipeline();
  const auto pts = read_csv(p / "translated_x2y.csv");
  CHECK(pts.headers == std::vector<std::string>{"source_0", "source_1", "translated_0", "translated_1"});
  CHECK(pts.rows.size() == 200);
  const auto cache = load_checkpoint(p / "translated_x2y");
  CHECK(cache.contains("source"));
  CHECK(cache.meta.at("domain") == "y");
  const auto traj = load_trajectory(p / "trajectory_x2y");
  CHECK(traj.direction == "x2y");
  CHECK(traj.steps == 10);
  CHECK(traj.batch == 200);
}

TEST_CASE("translate with zero steps reconstructs, and noiseless runs repeat") {
  auto& p = pipeline();
  ScratchDir a("t0"), b("t1"), c("t2");
  run_translate(p.cfg, p / "ae", p / "ebm_x2y", p / "data_x", {0, std::nullopt, std::nullopt}, a.path());
  const auto ae = autoencoder_from_checkpoint(load_checkpoint(p / "ae"));
  const auto x = load_dataset(p / "data_x");
  NoGradGuard ng;
  const Tensor rec = decode(ae, encode_mean(ae, x.samples));
  const auto out = load_dataset(a / "translated_x2y");
  CHECK(std::vector<double>(out.samples.data().begin(), out.samples.data().end()) ==
        std::vector<double>(rec.data().begin(), rec.data().end()));

  run_translate(p.cfg, p / "ae", p / "ebm_x2y", p / "data_x", {std::nullopt, 0.0, std::nullopt}, b.path());
  run_translate(p.cfg, p / "ae", p / "ebm_x2y", p / "data_x", {std::nullopt, 0.0, std::nullopt}, c.path());
  CHECK(slurp(b / "translated_x2y.csv") == slurp(c / "translated_x2y.csv"));
  CHECK(slurp(b / "translated_x2y.csv") == slurp(p / "translated_x2y.csv"));
}

TEST_CASE("frame strip has floor(T / stride) + 1 panels") {
  auto& p = pipeline();
  for (std::size_t stride : {1u, 3u, 10u}) {
    CAPTURE(stride);
    ScratchDir d("strip");
    run_translate(p.cfg, p / "ae", p / "ebm_y2x", p / "data_y", {std::nullopt, std::nullopt, stride}, d.path());
    const auto img = read_ppm(d / "frames_y2x.ppm");
    CHECK(img.width == (10 / stride + 1) * 96);
    CHECK(img.height == 96);
  }
}

TEST_CASE("analyze") {
  auto& p = pipeline();
  ScratchDir both("an2"), one("an1");
  const auto out = run_analyze({p / "trajectory_x2y", p / "trajectory_y2x"}, both.path());
  CHECK(out.warnings.empty());
  const auto heat = read_csv(both / "heatmap.csv");
  CHECK(heat.headers.size() == p.cfg.ae.latent_dim);
  CHECK(heat.rows.size() == 2);
  const auto mi = read_csv(both / "mutual_inverse.csv");
  CHECK(mi.headers == std::vector<std::string>{"mutual_inverse_score"});
  CHECK((mi.rows[0][0] >= -1.0 && mi.rows[0][0] <= 1.0));
  const auto gap = read_csv(both / "energy_gap.csv");
  CHECK(gap.rows.size() == 2);
  CHECK(gap.rows[0][0] == 0.0);
  CHECK(gap.rows[1][0] == 1.0);

  const auto single = run_analyze({p / "trajectory_x2y"}, one.path());
  CHECK(single.warnings.size() == 1);
  CHECK_FALSE(fs::exists(one / "mutual_inverse.csv"));
}

TEST_CASE("eval") {
  auto& p = pipeline();
  ScratchDir d("eval");
  run_eval(p / "ae", p / "translated_x2y", p / "data_y", d.path());
  const auto m = read_csv(d / "metrics.csv");
  CHECK(m.headers == metrics_headers());
  CHECK(m.headers == std::vector<std::string>{"frechet_translated_target", "mmd2_translated_target",
                                              "frechet_source_target", "mmd2_source_target"});
  CHECK(m.rows.size() == 1);
  CHECK(read_csv(d / "recon_mse.csv").headers == std::vector<std::string>{"domain", "mse", "mse_x1e-3"});

  // Translated set equal to the target: zero distance; the unbiased MMD of a
  // set against itself is mean off-diagonal minus mean diagonal kernel, <= 0.
  ScratchDir same("eval-same");
  Checkpoint c = load_checkpoint(p / "data_y");
  c.add("source", load_checkpoint(p / "data_x").get("samples"));
  save_checkpoint(c, same / "fake");
  run_eval(p / "ae", same / "fake", p / "data_y", same.path());
  const auto s = read_csv(same / "metrics.csv");
  CHECK(std::abs(s.rows[0][0]) < 1e-8);
  CHECK(s.rows[0][1] <= 0.0);
}

TEST_CASE("stage exit codes") {
  auto& p = pipeline();
  ScratchDir d("codes");
  const RunConfig cfg = p.cfg;
  CHECK(expect_code([&] { run_pretrain_ae(cfg, d / "nowhere", d.path()); }) == kExitMissingData);
  CHECK(expect_code([&] { run_train_ebm(cfg, d / "no-ae", p.dir.path(), Direction::x2y, d.path()); }) ==
        kExitMissingData);
  CHECK(expect_code([] { parse_direction("sideways"); }) == kExitConfig);

  // EBM over a different latent width.
  RunConfig wide = cfg;
  wide.ae.latent_dim = 4;
  wide.ae.epochs = 1;
  wide.ebm.iterations = 1;
  run_pretrain_ae(wide, p.dir.path(), d / "wide");
  CHECK(expect_code([&] {
          run_translate(cfg, d / "wide" / "ae", p / "ebm_x2y", p / "data_x", {}, d / "t");
        }) == kExitModelMismatch);

  std::filesystem::copy_file(p / "trajectory_x2y.json", d / "bad.json");
  std::ofstream(d / "bad.bin") << "short";
  CHECK(expect_code([&] { run_analyze({d / "bad"}, d / "a"); }) == kExitCorruptArtifact);
  CHECK(expect_code([&] { run_analyze({d / "absent"}, d / "a"); }) == kExitMissingData);

  Checkpoint tiny;
  tiny.meta = load_checkpoint(p / "translated_x2y").meta;
  tiny.add("samples", Tensor({1, 2}, {0.1, 0.2}));
  tiny.add("feature_min", Tensor::vector({0.1, 0.2}));
  tiny.add("feature_max", Tensor::vector({0.1, 0.2}));
  tiny.add("source", Tensor({1, 2}, {0.1, 0.2}));
  save_checkpoint(tiny, d / "tiny");
  CHECK(expect_code([&] { run_eval(p / "ae", d / "tiny", p / "data_y", d / "e"); }) == kExitMetricPrecondition);
}

TEST_CASE("CLI exit codes and output") {
  auto& p = pipeline();
  ScratchDir d("cli");
  const std::string out = " --out " + d.path().string();
  CHECK(cli("gen-data --set ae.latnet_dim=4" + out) == 2);
  CHECK(cli("gen-data --set data.count=1" + out) == 2);
  CHECK(cli("gen-data --config " + (d / "absent.json").string() + out) == 2);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("train-ebm" + out) == 2);  // --direction missing
  CHECK(cli("train-ebm --direction up" + out) == 2);
  CHECK(cli("pretrain-ae --data " + (d / "empty").string() + out) == 3);
  CHECK(cli("train-ebm --direction x2y --ae-checkpoint " + (p / "ae").string() + " --data " + (d / "empty").string() +
            out) == 3);
  CHECK(cli("analyze --trajectories " + (d / "none").string() + out) == 3);

  RunConfig wide = p.cfg;
  wide.ae.latent_dim = 3;
  wide.ae.epochs = 1;
  run_pretrain_ae(wide, p.dir.path(), d / "wide");
  CHECK(cli("translate --ae " + (d / "wide" / "ae").string() + " --ebm " + (p / "ebm_x2y").string() + " --input " +
            (p / "data_x").string() + out) == 4);

  std::filesystem::copy_file(p / "ae.json", d / "broken.json");
  std::ofstream(d / "broken.bin") << "xx";
  CHECK(cli("eval --ae " + (d / "broken").string() + " --translated " + (p / "translated_x2y").string() +
            " --target-data " + (p / "data_y").string() + out) == 5);

  int code = -1;
  const std::string text = cli_output("gen-data --set data.count=50" + out, code);
  CHECK(code == 0);
  CHECK(text.find((d / "data_x.json").string()) != std::string::npos);
  CHECK(text.find((d / "preview.ppm").string()) != std::string::npos);

  const std::string warn =
      cli_output("analyze --trajectories " + (p / "trajectory_x2y").string() + " --out " + (d / "an").string(), code);
  CHECK(code == 0);
  CHECK(warn.find("warning") != std::string::npos);

  // Relative outputs land under the environment's output root.
  ::setenv(kOutputRootEnv, d.path().c_str(), 1);
  CHECK(cli("gen-data --set data.count=20 --out rel") == 0);
  ::unsetenv(kOutputRootEnv);
  CHECK(fs::exists(d / "rel" / "data_x.bin"));
}
