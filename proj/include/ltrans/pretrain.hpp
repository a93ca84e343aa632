// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "ltrans/data.hpp"
#include "ltrans/nets.hpp"
#include "ltrans/optim.hpp"

namespace ltrans {

struct AeTrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer{OptimizerKind::adam, 1e-3};
};

struct AeEpochLoss {
  double loss = 0.0;   // minimized objective, batch-averaged
  double recon = 0.0;  // reconstruction MSE
  double kl = 0.0;     // zero in plain mode
};

/// Trains on the pooled samples of both domains. Returns one entry per epoch.
std::vector<AeEpochLoss> pretrain_autoencoder(AutoencoderModel& ae, const DomainDataset& x, const DomainDataset& y,
                                              const AeTrainConfig& cfg, std::uint64_t seed);

}  // namespace ltrans
