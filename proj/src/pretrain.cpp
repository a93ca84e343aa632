// SPDX-License-Identifier: Apache-2.0
#include "ltrans/pretrain.hpp"

#include "ltrans/errors.hpp"
#include "ltrans/ops.hpp"

namespace ltrans {

std::vector<AeEpochLoss> pretrain_autoencoder(AutoencoderModel& ae, const DomainDataset& x, const DomainDataset& y,
                                              const AeTrainConfig& cfg, std::uint64_t seed) {
  if (x.data_dim() != ae.data_dim() || y.data_dim() != ae.data_dim()) {
    throw DimensionError("datasets do not match the autoencoder's data dimension");
  }
  const DomainDataset pooled = make_dataset(Domain::x, concat_rows(x.samples, y.samples), x.image_mode && y.image_mode,
                                            x.image_side);
  auto params = ae.parameters();
  Optimizer opt(cfg.optimizer);
  std::vector<AeEpochLoss> history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    BatchIterator batches(pooled, cfg.batch_size, seed, epoch);
    auto noise = RandomStream::named(seed, streams::kReparam, epoch);
    AeEpochLoss acc;
    std::size_t count = 0;
    while (auto batch = batches.next()) {
      zero_grads(params);
      Tensor loss;
      if (ae.mode == AeMode::beta_vae) {
        const ElboTerms terms = elbo_loss(ae, *batch, noise);
        loss = terms.total;
        acc.recon += terms.recon.item();
        acc.kl += terms.kl.item();
      } else {
        loss = recon_loss(*batch, decode(ae, encode(ae, *batch, nullptr).z));
        acc.recon += loss.item();
      }
      acc.loss += loss.item();
      backward(loss);
      opt.step(params);
      ++count;
    }
    const double inv = 1.0 / static_cast<double>(count);
    history.push_back({acc.loss * inv, acc.recon * inv, acc.kl * inv});
  }
  return history;
}

}  // namespace ltrans
