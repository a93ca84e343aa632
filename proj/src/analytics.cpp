// SPDX-License-Identifier: Apache-2.0
#include "ltrans/analytics.hpp"

#include <algorithm>
#include <cmath>

#include "ltrans/errors.hpp"
#include "ltrans/kernels.hpp"
#include "ltrans/ops.hpp"

namespace ltrans {

ShiftProfile shift_profile(const Trajectory& traj) {
  if (traj.steps == 0 || traj.gradients.empty()) throw ContractError("shift profile needs recorded gradients");
  const std::size_t n = traj.batch;
  const std::size_t d = traj.dim;
  std::vector<double> per_sample(n * d, 0.0);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * d * traj.steps > 65536)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    for (std::size_t t = 0; t < traj.steps; ++t) {
      const double* g = traj.gradients.data() + (t * n + static_cast<std::size_t>(i)) * d;
      for (std::size_t k = 0; k < d; ++k) per_sample[i * d + k] += std::abs(g[k]);
    }
  }
  ShiftProfile profile;
  profile.values.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) profile.values[k] += per_sample[i * d + k];
  }
  for (double& v : profile.values) v /= static_cast<double>(n);
  profile.per_sample = Tensor({n, d}, std::move(per_sample));
  profile.direction = traj.direction;
  return profile;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("correlation inputs differ in length");
  if (a.size() < 2) throw DomainError("correlation needs at least two entries");
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0;
  double va = 0.0;
  double vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) throw DomainError("correlation is undefined for a constant profile");
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

double mutual_inverse_score(const ShiftProfile& forward, const ShiftProfile& backward) {
  if (forward.latent_dim() != backward.latent_dim()) throw DimensionError("profiles differ in latent_dim");
  return pearson_correlation(forward.values, backward.values);
}

GaussianFit fit_gaussian(const Tensor& feats) {
  if (feats.rank() != 2) throw DimensionError("features must be a matrix");
  const std::size_t n = feats.rows();
  const std::size_t d = feats.cols();
  if (n < 2) throw ContractError("a Gaussian fit needs at least two samples");
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      feats.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  GaussianFit fit;
  fit.count = n;
  fit.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - fit.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  fit.covariance = 0.5 * (cov + cov.transpose());
  return fit;
}

namespace {

constexpr double kPsdTolerance = 1e-10;
constexpr double kTraceResidue = 1e-8;

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* which) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw DomainError(std::string("eigendecomposition failed for ") + which);
  Eigen::VectorXd values = eig.eigenvalues();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < -kPsdTolerance) throw DomainError(std::string(which) + " covariance is not positive semidefinite");
    values(i) = std::sqrt(std::max(values(i), 0.0));
  }
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  if (a.mean.size() != b.mean.size() || a.covariance.rows() != b.covariance.rows()) {
    throw DimensionError("Gaussian fits differ in dimension");
  }
  const Eigen::MatrixXd root_a = psd_sqrt(a.covariance, "first");
  psd_sqrt(b.covariance, "second");
  Eigen::MatrixXd inner = root_a * b.covariance * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw DomainError("eigendecomposition of the covariance product failed");
  double root_trace = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) root_trace += std::sqrt(std::max(eig.eigenvalues()(i), 0.0));
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double d = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * root_trace;
  if (d < 0.0 && d > -kTraceResidue) return 0.0;
  return d;
}

double kid_mmd(const Tensor& a, const Tensor& b, const MmdOptions& options) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) throw DimensionError("MMD feature sets differ in width");
  const std::size_t n = a.rows();
  const std::size_t m = b.rows();
  if (n < 2 || m < 2) throw ContractError("unbiased MMD needs at least two samples per set");
  const std::size_t d = a.cols();
  const kernels::PolyKernel kernel{options.scale.value_or(1.0 / static_cast<double>(d)), options.coef, options.degree};
  const double kaa = kernels::poly_kernel_offdiag_sum(a.data(), n, d, kernel);
  const double kbb = kernels::poly_kernel_offdiag_sum(b.data(), m, d, kernel);
  const double kab = kernels::poly_kernel_cross_sum(a.data(), n, b.data(), m, d, kernel);
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  return kaa / (dn * (dn - 1.0)) + kbb / (dm * (dm - 1.0)) - 2.0 * kab / (dn * dm);
}

std::vector<MseRow> recon_mse_table(const AutoencoderModel& ae, std::span<const DomainDataset> datasets) {
  NoGradGuard no_grad;
  std::vector<MseRow> rows;
  for (const auto& ds : datasets) {
    const Tensor rec = decode(ae, encode_mean(ae, ds.samples));
    const double mse = recon_loss(ds.samples, rec).item();
    rows.push_back({ds.domain, mse, mse * 1e3});
  }
  return rows;
}

CsvTable mse_table_csv(std::span<const MseRow> rows) {
  CsvTable table;
  table.headers = {"domain", "mse", "mse_x1e-3"};
  for (const auto& r : rows) table.rows.push_back({r.domain == Domain::x ? 0.0 : 1.0, r.mse, r.mse_e3});
  return table;
}

void export_heatmap(std::span<const ShiftProfile> profiles, const std::filesystem::path& path) {
  if (profiles.empty()) throw ContractError("heatmap needs at least one profile");
  const std::size_t d = profiles.front().latent_dim();
  CsvTable table;
  for (std::size_t k = 0; k < d; ++k) table.headers.push_back("dim_" + std::to_string(k));
  for (const auto& p : profiles) {
    if (p.latent_dim() != d) throw DimensionError("heatmap profiles differ in latent_dim");
    table.rows.push_back(p.values);
  }
  write_csv(table, path);
}

}  // namespace ltrans
