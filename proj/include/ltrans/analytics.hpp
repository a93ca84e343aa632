// SPDX-License-Identifier: Apache-2.0
//
// Latent-shift diagnostics and two-sample metrics.
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ltrans/data.hpp"
#include "ltrans/io.hpp"
#include "ltrans/nets.hpp"
#include "ltrans/tensor.hpp"
#include "ltrans/transport.hpp"

namespace ltrans {

/// Aggregated absolute latent shift: for each sample and latent dimension,
/// the sum over chain steps of |dE/dz_d|. Dimensions that barely move
/// behave as shared content; strongly activated ones carry domain style.
struct ShiftProfile {
  std::vector<double> values;  // column means of per_sample
  Tensor per_sample;           // [n x latent_dim]
  std::string direction;

  std::size_t latent_dim() const { return values.size(); }
};

ShiftProfile shift_profile(const Trajectory& traj);

/// Pearson correlation of two profiles. Throws DomainError when either
/// profile has zero variance.
double mutual_inverse_score(const ShiftProfile& forward, const ShiftProfile& backward);
double pearson_correlation(std::span<const double> a, std::span<const double> b);

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::size_t count = 0;
};

/// Sample mean and unbiased, symmetrized covariance of the rows of feats.
GaussianFit fit_gaussian(const Tensor& feats);

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)). The root trace is
/// taken from the symmetric form S_a^(1/2) S_b S_a^(1/2).
double frechet_distance(const GaussianFit& a, const GaussianFit& b);

struct MmdOptions {
  int degree = 3;
  double coef = 1.0;
  std::optional<double> scale;  // defaults to 1 / d
};

/// Unbiased MMD^2 with k(x, y) = (scale * x.y + coef)^degree.
double kid_mmd(const Tensor& a, const Tensor& b, const MmdOptions& options = {});

struct MseRow {
  Domain domain;
  double mse = 0.0;     // elementwise mean squared error
  double mse_e3 = 0.0;  // the same in units of 1e-3
};

std::vector<MseRow> recon_mse_table(const AutoencoderModel& ae, std::span<const DomainDataset> datasets);
/// Columns: domain (0 = x, 1 = y), mse, mse_x1e-3.
CsvTable mse_table_csv(std::span<const MseRow> rows);

/// One row per profile, one column per latent dimension (dim_0 ...).
void export_heatmap(std::span<const ShiftProfile> profiles, const std::filesystem::path& path);

}  // namespace ltrans
