// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Runs single-threaded so the timings are
// one-core numbers.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "ltrans/analytics.hpp"
#include "ltrans/checkpoint.hpp"
#include "ltrans/commands.hpp"
#include "ltrans/data.hpp"
#include "ltrans/kernels.hpp"
#include "ltrans/nets.hpp"
#include "ltrans/ops.hpp"
#include "ltrans/transport.hpp"

using namespace ltrans;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, Verdict& v) {
  std::printf("criterion %d: %s%s\n", id, v.pass ? "PASS" : "FAIL", v.detail.str().c_str());
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

void run_criterion(int id, const std::function<void(Verdict&)>& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.require(false, std::string("exception: ") + e.what());
  }
  report(id, v);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ||a - fd|| / ||fd|| over one tensor.
double rel_err(std::span<const double> a, const std::vector<double>& fd) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    num += (a[i] - fd[i]) * (a[i] - fd[i]);
    den += fd[i] * fd[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

Tensor random_matrix(std::size_t r, std::size_t c, RandomStream& rng, double sd = 1.0) {
  std::vector<double> v(r * c);
  for (double& x : v) x = sd * rng.normal();
  return Tensor({r, c}, std::move(v));
}

Tensor with_grad(const Tensor& t) {
  return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), true);
}

// Checks every parameter (and the input) of `loss(params, input)`.
double worst_gradient_error(const std::function<Tensor(const std::vector<Tensor>&, const Tensor&)>& loss,
                            const std::vector<Tensor>& params, const Tensor& input) {
  std::vector<Tensor> leaves;
  for (const auto& p : params) leaves.push_back(with_grad(p));
  const Tensor x = with_grad(input);
  std::vector<Tensor> wrt = leaves;
  wrt.push_back(x);
  const auto analytic = gradients(loss(leaves, x), wrt);
  double worst = 0.0;
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    const auto fd = test::numeric_grad(
        [&](const Tensor& p) {
          NoGradGuard ng;
          std::vector<Tensor> ps = params;
          Tensor in = input;
          if (k < params.size()) {
            ps[k] = p;
          } else {
            in = p;
          }
          return loss(ps, in).item();
        },
        wrt[k].detach());
    worst = std::max(worst, rel_err(analytic[k].data(), fd));
  }
  return worst;
}

Mlp with_params(Mlp m, const std::vector<Tensor>& ps, std::size_t offset) {
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    m.weights[l] = ps[offset + 2 * l];
    m.biases[l] = ps[offset + 2 * l + 1];
  }
  return m;
}

void criterion_gradients(Verdict& v) {
  const auto t0 = Clock::now();
  RandomStream rng(2024);
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    const std::size_t latent = 2 + rng.below(6);
    const std::size_t depth = 1 + rng.below(3);
    std::vector<std::size_t> hidden;
    for (std::size_t d = 0; d < depth; ++d) hidden.push_back(3 + rng.below(8));
    const std::size_t batch = 2 + rng.below(5);
    double err = 0.0;
    if (c % 2 == 0) {
      // Energy network, wrt its parameters and its input codes.
      const EnergyModel model = make_energy_model(latent, hidden, rng, 0.1 + 0.3 * rng.uniform());
      const Tensor z = random_matrix(batch, latent, rng);
      err = worst_gradient_error(
          [&](const std::vector<Tensor>& ps, const Tensor& in) {
            const EnergyModel m{with_params(model.net, ps, 0)};
            return mean(m.energy(in));
          },
          model.parameters(), z);
    } else {
      // beta-VAE loss with the reparameterization noise held fixed.
      const std::size_t data = 2 + rng.below(5);
      const AutoencoderModel ae = make_autoencoder(data, latent, hidden, AeMode::beta_vae, 0.1 + rng.uniform(),
                                                   c % 4 == 1 ? Activation::sigmoid : Activation::identity, rng);
      const Tensor u = random_matrix(batch, data, rng, 0.5);
      const std::uint64_t noise_seed = rng.next_u64();
      const std::size_t n_enc = ae.encoder.parameters().size();
      std::vector<Tensor> params = ae.encoder.parameters();
      for (const auto& p : ae.decoder.parameters()) params.push_back(p);
      err = worst_gradient_error(
          [&](const std::vector<Tensor>& ps, const Tensor& in) {
            AutoencoderModel m = ae;
            m.encoder = with_params(ae.encoder, ps, 0);
            m.decoder = with_params(ae.decoder, ps, n_enc);
            RandomStream noise(noise_seed);
            return elbo_loss(m, in, noise).total;
          },
          params, u);
    }
    worst = std::max(worst, err);
  }
  const double secs = seconds_since(t0);
  v.detail << " worst relative error " << worst << ", " << secs << " s";
  v.require(worst < 1e-4, "relative error < 1e-4");
  v.require(secs < 30.0, "runtime < 30 s");
}

Tensor half_square(const Tensor& z) { return scale(sum_rows(square(z)), 0.5); }

void criterion_langevin(Verdict& v) {
  const auto t0 = Clock::now();
  // Noiseless: eta = 0.5 gives z <- 0.75 z.
  LangevinConfig quiet;
  quiet.steps = 20;
  quiet.step_size = 0.5;
  quiet.noise_scale = 0.0;
  const Tensor z0 = Tensor::matrix({{1.0, -2.0}, {0.5, 3.0}});
  const auto chain = langevin_sample(half_square, z0, quiet, 1);
  bool exact = true;
  for (std::size_t i = 0; i < z0.numel(); ++i) {
    double expect = z0.data()[i];
    for (int t = 0; t < 20; ++t) expect *= 0.75;
    exact = exact && chain.z.data()[i] == expect;
  }
  v.require(exact, "(0.75)^T contraction");

  const double eta = 0.1;
  LangevinConfig noisy;
  noisy.steps = 5000;
  noisy.step_size = eta;
  noisy.noise_scale = 1.0;
  const Tensor zt = langevin_sample(half_square, Tensor::zeros({400, 1}), noisy, 99).z;
  double m = 0.0;
  for (double x : zt.data()) m += x;
  m /= zt.numel();
  double var = 0.0;
  for (double x : zt.data()) var += (x - m) * (x - m);
  var /= zt.numel() - 1;
  std::mt19937_64 gen(12345);
  std::normal_distribution<double> normal;
  double z = 0.0, s = 0.0, s2 = 0.0;
  const int burn = 5000, keep = 400000;
  for (int t = 0; t < burn + keep; ++t) {
    z = z - 0.5 * eta * z + std::sqrt(eta) * normal(gen);
    if (t >= burn) {
      s += z;
      s2 += z * z;
    }
  }
  const double oracle = s2 / keep - (s / keep) * (s / keep);
  const double secs = seconds_since(t0);
  v.detail << " variance " << var << " vs scalar chain " << oracle << ", " << secs << " s";
  v.require(std::abs(var - oracle) < 0.15 * oracle, "variance within 15%");
  v.require(secs < 60.0, "runtime < 60 s");
}

void criterion_gradient_identity(Verdict& v) {
  RandomStream rng(3);
  RandomStream init(0);
  EnergyModel model{Mlp::init({{4, 1}}, InitScheme::zeros, init)};
  const std::vector<double> theta{0.4, -1.1, 0.7, 0.2};
  std::copy(theta.begin(), theta.end(), model.net.weights[0].mutable_data().begin());
  const Tensor z_pos = random_matrix(32, 4, rng);
  const Tensor z_neg = random_matrix(32, 4, rng);
  LangevinConfig cfg;
  cfg.steps = 10;
  cfg.step_size = 0.3;
  cfg.noise_scale = 1.0;
  Optimizer opt({OptimizerKind::sgd, 0.1});
  const EbmStep step = ebm_grad_step(model, z_pos, z_neg, cfg, opt, 44);
  const auto g = model.net.weights[0].grad();
  double worst = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    double mp = 0.0, mn = 0.0;
    for (std::size_t r = 0; r < 32; ++r) {
      mp += z_pos.at(r, c);
      mn += step.negatives.at(r, c);
    }
    const double expect = mp / 32 - mn / 32;
    worst = std::max(worst, std::abs(g[c] - expect) / std::max(std::abs(expect), 1.0));
  }
  const double bias = model.net.biases[0].grad()[0];
  v.detail << " max deviation " << worst << ", bias gradient " << bias;
  v.require(worst < 1e-13, "weight gradient at machine precision");
  v.require(bias == 0.0, "bias gradient cancels");
}

// Full pie or glyph run into `out`; returns per-stage seconds.
struct PipelineTimes {
  double total = 0.0;
  double ebm_x2y = 0.0;
  double ebm_y2x = 0.0;
};

PipelineTimes run_pipeline(const RunConfig& cfg, const fs::path& out) {
  PipelineTimes t;
  const auto t0 = Clock::now();
  run_gen_data(cfg, out);
  run_pretrain_ae(cfg, out, out);
  auto t1 = Clock::now();
  run_train_ebm(cfg, out / artifacts::kAutoencoder, out, Direction::x2y, out);
  t.ebm_x2y = seconds_since(t1);
  t1 = Clock::now();
  run_train_ebm(cfg, out / artifacts::kAutoencoder, out, Direction::y2x, out);
  t.ebm_y2x = seconds_since(t1);
  run_translate(cfg, out / artifacts::kAutoencoder, out / artifacts::ebm(Direction::x2y), out / artifacts::kDataX, {},
                out);
  run_translate(cfg, out / artifacts::kAutoencoder, out / artifacts::ebm(Direction::y2x), out / artifacts::kDataY, {},
                out);
  t.total = seconds_since(t0);
  run_analyze({out / artifacts::trajectory(Direction::x2y), out / artifacts::trajectory(Direction::y2x)}, out);
  return t;
}

PieSpec sector(const PieGeometry& g) {
  PieSpec s;
  s.center = g.center;
  s.inner = g.inner;
  s.outer = g.outer;
  s.start_deg = g.start_deg;
  s.sweep_deg = g.sweep_deg;
  return s;
}

double inside_fraction(const Tensor& pts, const PieSpec& s) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < pts.rows(); ++r) hits += s.contains(pts.at(r, 0), pts.at(r, 1)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pts.rows());
}

// Criteria 5 to 7 on a finished run.
void content_shift(Verdict& v, const fs::path& out) {
  for (Direction d : {Direction::x2y, Direction::y2x}) {
    const ShiftProfile p = shift_profile(load_trajectory(out / artifacts::trajectory(d)));
    const auto [lo, hi] = std::minmax_element(p.values.begin(), p.values.end());
    const double ratio = *lo / *hi;
    v.detail << " " << to_string(d) << " min/max " << ratio;
    v.require(ratio < 0.1, to_string(d) + " min shift < 10% of max");
  }
}

void mutual_inverse(Verdict& v, const fs::path& out) {
  const double r = mutual_inverse_score(shift_profile(load_trajectory(out / artifacts::trajectory(Direction::x2y))),
                                        shift_profile(load_trajectory(out / artifacts::trajectory(Direction::y2x))));
  v.detail << " correlation " << r;
  v.require(r > 0.7, "correlation > 0.7");
}

void energy_ordering(Verdict& v, const fs::path& out) {
  const AutoencoderModel ae = autoencoder_from_checkpoint(load_checkpoint(out / artifacts::kAutoencoder));
  NoGradGuard ng;
  const Tensor zx = encode_mean(ae, load_dataset(out / artifacts::kDataX).samples);
  const Tensor zy = encode_mean(ae, load_dataset(out / artifacts::kDataY).samples);
  for (Direction d : {Direction::x2y, Direction::y2x}) {
    const EnergyModel e = energy_model_from_checkpoint(load_checkpoint(out / artifacts::ebm(d)));
    const double e_target = mean_energy(e, d == Direction::x2y ? zy : zx);
    const double e_source = mean_energy(e, d == Direction::x2y ? zx : zy);
    v.detail << " " << to_string(d) << " gap " << (e_source - e_target);
    v.require(e_target < e_source, to_string(d) + " target energy below source energy");
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void metric_oracles(Verdict& v) {
  // N(0,1) vs N(1,1): squared mean gap 1, no covariance term.
  GaussianFit a;
  a.mean = Eigen::VectorXd::Zero(1);
  a.covariance = Eigen::MatrixXd::Identity(1, 1);
  a.count = 2;
  GaussianFit b = a;
  b.mean = Eigen::VectorXd::Ones(1);
  const double fd = frechet_distance(a, b);
  v.detail << " frechet " << fd;
  v.require(std::abs(fd - 1.0) < 1e-8, "Frechet 1-d value within 1e-8");

  RandomStream rng(9);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng.below(4);
    const Tensor x = random_matrix(2, d, rng);
    const Tensor y = random_matrix(2, d, rng);
    const double s = 1.0 / static_cast<double>(d);
    auto k = [&](const Tensor& p, std::size_t i, const Tensor& q, std::size_t j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += p.at(i, c) * q.at(j, c);
      return std::pow(s * dot + 1.0, 3);
    };
    // m = n = 2: one off-diagonal pair per set, four cross pairs.
    const double brute = (2 * k(x, 0, x, 1)) / 2.0 + (2 * k(y, 0, y, 1)) / 2.0 -
                         2.0 * (k(x, 0, y, 0) + k(x, 0, y, 1) + k(x, 1, y, 0) + k(x, 1, y, 1)) / 4.0;
    const double got = kid_mmd(x, y);
    worst = std::max(worst, std::abs(got - brute) / std::max(1.0, std::abs(brute)));
  }
  v.detail << ", MMD max deviation " << worst;
  v.require(worst < 1e-12, "MMD brute force within 1e-12");
}

}  // namespace

int main() {
  kernels::set_num_threads(1);
  test::ScratchDir scratch("acceptance");

  run_criterion(1, criterion_gradients);
  run_criterion(2, criterion_langevin);
  run_criterion(3, criterion_gradient_identity);

  const RunConfig pie = default_run_config(DataKind::pie);
  const fs::path pie_out = scratch / "pie";
  PipelineTimes pie_times;
  bool pie_ok = true;
  std::string pie_error;
  try {
    pie_times = run_pipeline(pie, pie_out);
  } catch (const std::exception& e) {
    pie_ok = false;
    pie_error = e.what();
  }
  auto needs_pie = [&](const std::function<void(Verdict&)>& body) {
    return [&, body](Verdict& v) {
      v.require(pie_ok, "pie pipeline: " + pie_error);
      if (pie_ok) body(v);
    };
  };

  run_criterion(4, needs_pie([&](Verdict& v) {
                  const auto x = load_dataset(pie_out / artifacts::kDataX).samples;
                  const auto y = load_dataset(pie_out / artifacts::kDataY).samples;
                  const auto tx = load_dataset(pie_out / artifacts::translated(Direction::x2y)).samples;
                  const auto ty = load_dataset(pie_out / artifacts::translated(Direction::y2x)).samples;
                  const double in_y = inside_fraction(tx, sector(pie.data.pie_y));
                  const double in_x = inside_fraction(ty, sector(pie.data.pie_x));
                  const double mmd_t = kid_mmd(tx, y);
                  const double mmd_s = kid_mmd(x, y);
                  v.detail << " " << pie_times.total << " s, inside x2y " << in_y << " y2x " << in_x
                           << ", MMD translated " << mmd_t << " source " << mmd_s;
                  v.require(pie_times.total < 300.0, "pipeline < 5 min");
                  v.require(in_y >= 0.95 && in_x >= 0.95, ">= 95% inside target sector");
                  v.require(mmd_t < mmd_s / 5.0, "MMD ratio > 5");
                  const double mmd_back = kid_mmd(ty, x);
                  v.detail << ", y2x MMD " << mmd_back << " vs " << mmd_s;
                  v.require(mmd_back < mmd_s / 5.0, "y2x MMD ratio > 5");
                }));
  run_criterion(5, needs_pie([&](Verdict& v) { content_shift(v, pie_out); }));
  run_criterion(6, needs_pie([&](Verdict& v) { mutual_inverse(v, pie_out); }));
  run_criterion(7, needs_pie([&](Verdict& v) { energy_ordering(v, pie_out); }));

  run_criterion(8, [&](Verdict& v) {
    const RunConfig glyph = default_run_config(DataKind::glyph);
    const fs::path out = scratch / "glyph";
    const PipelineTimes t = run_pipeline(glyph, out);
    v.detail << " 200-iteration trainings " << t.ebm_x2y << " s and " << t.ebm_y2x << " s;";
    v.require(glyph.ebm.iterations == 200, "200 iterations");
    v.require(t.ebm_x2y < 180.0 && t.ebm_y2x < 180.0, "training < 3 min");
    content_shift(v, out);
    mutual_inverse(v, out);
    energy_ordering(v, out);
  });

  run_criterion(9, metric_oracles);

  run_criterion(10, needs_pie([&](Verdict& v) {
                   const fs::path again = scratch / "pie-again";
                   run_pipeline(pie, again);
                   std::size_t compared = 0;
                   for (const auto& entry : fs::directory_iterator(pie_out)) {
                     if (entry.path().extension() != ".csv") continue;
                     ++compared;
                     const fs::path other = again / entry.path().filename();
                     v.require(fs::exists(other) && slurp(entry.path()) == slurp(other),
                               entry.path().filename().string() + " identical");
                   }
                   v.detail << " " << compared << " CSV files compared";
                   v.require(compared >= 6, "all CSV artifacts present");
                 }));

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
