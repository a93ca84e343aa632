// SPDX-License-Identifier: Apache-2.0
//
// Tensor container on disk: `<base>.json` is a manifest listing each
// tensor's name, shape, byte offset and byte length inside `<base>.bin`,
// a raw blob of little-endian float64 values. Reading back is bit-exact.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ltrans/nets.hpp"
#include "ltrans/tensor.hpp"

namespace ltrans {

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  /// Free-form metadata stored in the manifest.
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  void add(std::string name, const Tensor& value) { tensors.push_back({std::move(name), value}); }
  bool contains(const std::string& name) const;
  /// Throws FormatError when absent.
  const Tensor& get(const std::string& name) const;
};

std::filesystem::path manifest_path(const std::filesystem::path& base);
std::filesystem::path blob_path(const std::filesystem::path& base);

/// Writes `<base>.json` and `<base>.bin`. Throws IoError on failure.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& base);
/// Throws IoError if the files cannot be read and FormatError if they
/// are inconsistent.
Checkpoint load_checkpoint(const std::filesystem::path& base);

/// FNV-1a over manifest and blob bytes; used to prove a file was not touched.
std::uint64_t checkpoint_checksum(const std::filesystem::path& base);

Checkpoint to_checkpoint(const AutoencoderModel& model);
AutoencoderModel autoencoder_from_checkpoint(const Checkpoint& ckpt);
Checkpoint to_checkpoint(const EnergyModel& model);
EnergyModel energy_model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace ltrans
