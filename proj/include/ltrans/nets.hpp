// SPDX-License-Identifier: Apache-2.0
//
// MLP building block, the autoencoder (plain or beta-VAE), the latent
// energy network, and the training losses.
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ltrans/rng.hpp"
#include "ltrans/tensor.hpp"

namespace ltrans {

enum class Activation { identity, leaky_relu, sigmoid };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct MlpSpec {
  std::vector<std::size_t> widths;
  Activation hidden = Activation::leaky_relu;
  Activation output = Activation::identity;
  double leaky_slope = 0.2;

  void validate() const;
  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }
  /// Sum over layers of in*out + out.
  std::size_t parameter_count() const;
};

enum class InitScheme { glorot_uniform, zeros };

/// Weights stored [in x out] so a layer is x W + b.
struct Mlp {
  MlpSpec spec;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  /// Glorot-uniform weights in (-a, a), a = sqrt(6 / (fan_in + fan_out));
  /// zero biases. Every parameter is a requires_grad leaf.
  static Mlp init(const MlpSpec& spec, InitScheme scheme, RandomStream& rng);

  Tensor forward(const Tensor& x) const;
  /// w0, b0, w1, b1, ...
  std::vector<Tensor> parameters() const;
};

enum class AeMode { plain, beta_vae };

std::string to_string(AeMode mode);
AeMode parse_ae_mode(const std::string& name);

struct AutoencoderModel {
  Mlp encoder;
  Mlp decoder;
  std::size_t latent_dim = 0;
  AeMode mode = AeMode::plain;
  double beta = 1.0;

  void validate() const;
  std::size_t data_dim() const { return encoder.spec.input_width(); }
  std::vector<Tensor> parameters() const;
};

/// Encoder [data, hidden..., latent (x2 for beta-VAE)] and the mirrored
/// decoder [latent, reversed hidden..., data].
AutoencoderModel make_autoencoder(std::size_t data_dim, std::size_t latent_dim,
                                  const std::vector<std::size_t>& hidden, AeMode mode, double beta,
                                  Activation decoder_output, RandomStream& rng);

struct Encoding {
  Tensor z;
  Tensor mu;
  Tensor logvar;  // undefined in plain mode
};

/// Plain mode: z = mu = Enc(u). Beta-VAE: z = mu + exp(logvar / 2) * eps
/// with eps drawn from `noise`; a null `noise` means eps = 0.
Encoding encode(const AutoencoderModel& model, const Tensor& u, RandomStream* noise);
/// Deterministic code: the plain output or the posterior mean.
Tensor encode_mean(const AutoencoderModel& model, const Tensor& u);
Tensor decode(const AutoencoderModel& model, const Tensor& z);

/// Elementwise mean squared error.
Tensor recon_loss(const Tensor& u, const Tensor& reconstruction);
/// Batch mean of 0.5 * sum_d (mu^2 + exp(logvar) - 1 - logvar): KL from
/// N(mu, diag exp(logvar)) to N(0, I).
Tensor kl_diag_gaussian(const Tensor& mu, const Tensor& logvar);

struct ElboTerms {
  Tensor total;  // recon + beta * kl, the quantity minimized
  Tensor recon;
  Tensor kl;
};

/// Negative beta-weighted ELBO. Only valid for beta-VAE models.
ElboTerms elbo_loss(const AutoencoderModel& model, const Tensor& u, RandomStream& noise);

/// Scalar-output network over latent codes. The normalizer is never
/// represented; training only needs energy differences.
struct EnergyModel {
  Mlp net;

  void validate() const;
  std::size_t latent_dim() const { return net.spec.input_width(); }
  /// One energy per row: [batch x 1].
  Tensor energy(const Tensor& z) const;
  std::vector<Tensor> parameters() const { return net.parameters(); }
};

/// Energy net with widths [latent_dim, hidden..., 1] and leaky-ReLU hidden layers.
EnergyModel make_energy_model(std::size_t latent_dim, const std::vector<std::size_t>& hidden,
                              RandomStream& rng, double leaky_slope = 0.2);

}  // namespace ltrans
