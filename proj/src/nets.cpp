// SPDX-License-Identifier: Apache-2.0
#include "ltrans/nets.hpp"

#include <cmath>

#include "ltrans/errors.hpp"
#include "ltrans/ops.hpp"

namespace ltrans {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity:
      return "identity";
    case Activation::leaky_relu:
      return "leaky_relu";
    case Activation::sigmoid:
      return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ContractError("unknown activation '" + name + "'");
}

std::string to_string(AeMode mode) { return mode == AeMode::plain ? "plain" : "beta_vae"; }

AeMode parse_ae_mode(const std::string& name) {
  if (name == "plain") return AeMode::plain;
  if (name == "beta_vae") return AeMode::beta_vae;
  throw ContractError("unknown autoencoder mode '" + name + "'");
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ContractError("an MLP needs at least two widths");
  for (std::size_t w : widths) {
    if (w == 0) throw ContractError("MLP widths must be positive");
  }
  if (!(leaky_slope >= 0.0)) throw ContractError("leaky slope must be non-negative");
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) count += widths[l] * widths[l + 1] + widths[l + 1];
  return count;
}

Mlp Mlp::init(const MlpSpec& spec, InitScheme scheme, RandomStream& rng) {
  spec.validate();
  Mlp mlp;
  mlp.spec = spec;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t fan_in = spec.widths[l];
    const std::size_t fan_out = spec.widths[l + 1];
    std::vector<double> w(fan_in * fan_out, 0.0);
    if (scheme == InitScheme::glorot_uniform) {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& v : w) v = rng.uniform(-a, a);
    }
    mlp.weights.emplace_back(Shape{fan_in, fan_out}, std::move(w), true);
    mlp.biases.push_back(Tensor::zeros({fan_out}, true));
  }
  return mlp;
}

namespace {
Tensor activate(const Tensor& x, Activation a, double slope) {
  switch (a) {
    case Activation::identity:
      return x;
    case Activation::leaky_relu:
      return leaky_relu(x, slope);
    case Activation::sigmoid:
      return sigmoid(x);
  }
  return x;
}
}  // namespace

Tensor Mlp::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != spec.input_width()) {
    throw DimensionError("MLP expects [batch x " + std::to_string(spec.input_width()) + "], got " +
                         shape_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = add_bias(matmul(h, weights[l]), biases[l]);
    const bool last = l + 1 == weights.size();
    h = activate(h, last ? spec.output : spec.hidden, spec.leaky_slope);
  }
  return h;
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> params;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    params.push_back(weights[l]);
    params.push_back(biases[l]);
  }
  return params;
}

void AutoencoderModel::validate() const {
  encoder.spec.validate();
  decoder.spec.validate();
  if (latent_dim == 0) throw ContractError("latent_dim must be positive");
  const std::size_t heads = mode == AeMode::beta_vae ? 2 * latent_dim : latent_dim;
  if (encoder.spec.output_width() != heads) {
    throw ContractError("encoder output width " + std::to_string(encoder.spec.output_width()) +
                        " does not match " + std::to_string(heads) + " for mode " + to_string(mode));
  }
  if (decoder.spec.input_width() != latent_dim) throw ContractError("decoder input width must equal latent_dim");
  if (decoder.spec.output_width() != encoder.spec.input_width()) {
    throw ContractError("decoder output width must equal the data dimension");
  }
  if (mode == AeMode::beta_vae && !(beta >= 0.0)) throw ContractError("beta must be non-negative");
}

std::vector<Tensor> AutoencoderModel::parameters() const {
  auto params = encoder.parameters();
  auto dec = decoder.parameters();
  params.insert(params.end(), dec.begin(), dec.end());
  return params;
}

AutoencoderModel make_autoencoder(std::size_t data_dim, std::size_t latent_dim,
                                  const std::vector<std::size_t>& hidden, AeMode mode, double beta,
                                  Activation decoder_output, RandomStream& rng) {
  MlpSpec enc;
  enc.widths.push_back(data_dim);
  enc.widths.insert(enc.widths.end(), hidden.begin(), hidden.end());
  enc.widths.push_back(mode == AeMode::beta_vae ? 2 * latent_dim : latent_dim);
  enc.output = Activation::identity;

  MlpSpec dec;
  dec.widths.push_back(latent_dim);
  dec.widths.insert(dec.widths.end(), hidden.rbegin(), hidden.rend());
  dec.widths.push_back(data_dim);
  dec.output = decoder_output;

  AutoencoderModel model;
  model.encoder = Mlp::init(enc, InitScheme::glorot_uniform, rng);
  model.decoder = Mlp::init(dec, InitScheme::glorot_uniform, rng);
  model.latent_dim = latent_dim;
  model.mode = mode;
  model.beta = beta;
  model.validate();
  return model;
}

Encoding encode(const AutoencoderModel& model, const Tensor& u, RandomStream* noise) {
  const Tensor out = model.encoder.forward(u);
  Encoding enc;
  if (model.mode == AeMode::plain) {
    enc.z = out;
    enc.mu = out;
    return enc;
  }
  const std::size_t d = model.latent_dim;
  enc.mu = slice_cols(out, 0, d);
  enc.logvar = slice_cols(out, d, 2 * d);
  if (noise == nullptr) {
    enc.z = enc.mu;
    return enc;
  }
  std::vector<double> eps(enc.mu.numel());
  for (double& e : eps) e = noise->normal();
  const Tensor eps_t(enc.mu.shape(), std::move(eps));
  enc.z = enc.mu + exp(scale(enc.logvar, 0.5)) * eps_t;
  return enc;
}

Tensor encode_mean(const AutoencoderModel& model, const Tensor& u) { return encode(model, u, nullptr).mu; }

Tensor decode(const AutoencoderModel& model, const Tensor& z) {
  if (z.rank() != 2 || z.shape()[1] != model.latent_dim) {
    throw DimensionError("decode expects [batch x " + std::to_string(model.latent_dim) + "], got " +
                         shape_string(z.shape()));
  }
  return model.decoder.forward(z);
}

Tensor recon_loss(const Tensor& u, const Tensor& reconstruction) {
  if (u.shape() != reconstruction.shape()) {
    throw DimensionError("recon_loss: " + shape_string(u.shape()) + " vs " + shape_string(reconstruction.shape()));
  }
  return mean(square(reconstruction - u));
}

Tensor kl_diag_gaussian(const Tensor& mu, const Tensor& logvar) {
  if (mu.shape() != logvar.shape()) throw DimensionError("kl_diag_gaussian: mu and logvar shapes differ");
  const double batch = static_cast<double>(mu.rows());
  const Tensor terms = add_scalar(square(mu) + exp(logvar) - logvar, -1.0);
  return scale(sum(terms), 0.5 / batch);
}

ElboTerms elbo_loss(const AutoencoderModel& model, const Tensor& u, RandomStream& noise) {
  if (model.mode != AeMode::beta_vae) throw ContractError("elbo_loss requires a beta_vae model");
  const Encoding enc = encode(model, u, &noise);
  ElboTerms terms;
  terms.recon = recon_loss(u, decode(model, enc.z));
  terms.kl = kl_diag_gaussian(enc.mu, enc.logvar);
  terms.total = terms.recon + scale(terms.kl, model.beta);
  return terms;
}

void EnergyModel::validate() const {
  net.spec.validate();
  if (net.spec.output_width() != 1) throw ContractError("an energy net must end with width 1");
  if (net.spec.output != Activation::identity) throw ContractError("an energy net must end with identity activation");
}

Tensor EnergyModel::energy(const Tensor& z) const { return net.forward(z); }

EnergyModel make_energy_model(std::size_t latent_dim, const std::vector<std::size_t>& hidden,
                              RandomStream& rng, double leaky_slope) {
  MlpSpec spec;
  spec.widths.push_back(latent_dim);
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(1);
  spec.hidden = Activation::leaky_relu;
  spec.output = Activation::identity;
  spec.leaky_slope = leaky_slope;
  EnergyModel model{Mlp::init(spec, InitScheme::glorot_uniform, rng)};
  model.validate();
  return model;
}

}  // namespace ltrans
