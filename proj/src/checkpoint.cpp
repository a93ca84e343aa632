// SPDX-License-Identifier: Apache-2.0
#include "ltrans/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ltrans/errors.hpp"

namespace ltrans {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "ltrans-f64-blob";
constexpr int kVersion = 1;

void append_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

double read_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return bytes;
}

void spill(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

json spec_to_json(const MlpSpec& spec) {
  return json{{"widths", spec.widths},
              {"hidden", to_string(spec.hidden)},
              {"output", to_string(spec.output)},
              {"leaky_slope", spec.leaky_slope}};
}

MlpSpec spec_from_json(const json& j) {
  MlpSpec spec;
  spec.widths = j.at("widths").get<std::vector<std::size_t>>();
  spec.hidden = parse_activation(j.at("hidden").get<std::string>());
  spec.output = parse_activation(j.at("output").get<std::string>());
  spec.leaky_slope = j.at("leaky_slope").get<double>();
  spec.validate();
  return spec;
}

void add_mlp(Checkpoint& ckpt, const std::string& prefix, const Mlp& mlp) {
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    ckpt.add(prefix + ".w" + std::to_string(l), mlp.weights[l]);
    ckpt.add(prefix + ".b" + std::to_string(l), mlp.biases[l]);
  }
}

Mlp load_mlp(const Checkpoint& ckpt, const std::string& prefix, const MlpSpec& spec) {
  Mlp mlp;
  mlp.spec = spec;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const Tensor& w = ckpt.get(prefix + ".w" + std::to_string(l));
    const Tensor& b = ckpt.get(prefix + ".b" + std::to_string(l));
    if (w.shape() != Shape{spec.widths[l], spec.widths[l + 1]} || b.numel() != spec.widths[l + 1]) {
      throw FormatError("layer " + std::to_string(l) + " of '" + prefix + "' does not match its spec");
    }
    mlp.weights.push_back(w.detach().set_requires_grad(true));
    mlp.biases.push_back(b.detach().set_requires_grad(true));
  }
  return mlp;
}

}  // namespace

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw FormatError("checkpoint has no tensor '" + name + "'");
}

fs::path manifest_path(const fs::path& base) { return fs::path(base.string() + ".json"); }
fs::path blob_path(const fs::path& base) { return fs::path(base.string() + ".bin"); }

void save_checkpoint(const Checkpoint& ckpt, const fs::path& base) {
  std::string blob;
  json entries = json::array();
  for (const auto& [name, value] : ckpt.tensors) {
    const std::size_t offset = blob.size();
    for (double v : value.data()) append_le(blob, v);
    entries.push_back({{"name", name}, {"shape", value.shape()}, {"offset", offset}, {"length", blob.size() - offset}});
  }
  json manifest{{"format", kFormat},
                {"version", kVersion},
                {"blob", blob_path(base).filename().string()},
                {"meta", ckpt.meta},
                {"tensors", entries}};
  spill(blob_path(base), blob);
  spill(manifest_path(base), manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& base) {
  const std::string text = slurp(manifest_path(base));
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("manifest " + manifest_path(base).string() + " is not valid JSON: " + e.what());
  }
  Checkpoint ckpt;
  try {
    if (manifest.at("format").get<std::string>() != kFormat) throw FormatError("unknown manifest format");
    if (manifest.at("version").get<int>() != kVersion) throw FormatError("unsupported manifest version");
    const std::string blob = slurp(blob_path(base));
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
    ckpt.meta = manifest.at("meta");
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto length = entry.at("length").get<std::size_t>();
      if (length != numel_of(shape) * 8 || offset % 8 != 0 || offset + length > blob.size()) {
        throw FormatError("tensor '" + name + "' has an inconsistent extent");
      }
      std::vector<double> values(length / 8);
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = read_le(bytes + offset + 8 * i);
      ckpt.tensors.push_back({name, Tensor(std::move(shape), std::move(values))});
    }
  } catch (const json::exception& e) {
    throw FormatError("manifest " + manifest_path(base).string() + " is malformed: " + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(std::string("bad tensor shape in manifest: ") + e.what());
  }
  return ckpt;
}

std::uint64_t checkpoint_checksum(const fs::path& base) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& path : {manifest_path(base), blob_path(base)}) {
    for (unsigned char c : slurp(path)) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

Checkpoint to_checkpoint(const AutoencoderModel& model) {
  Checkpoint ckpt;
  ckpt.meta = json{{"kind", "autoencoder"},
                   {"mode", to_string(model.mode)},
                   {"latent_dim", model.latent_dim},
                   {"beta", model.beta},
                   {"encoder", spec_to_json(model.encoder.spec)},
                   {"decoder", spec_to_json(model.decoder.spec)}};
  add_mlp(ckpt, "encoder", model.encoder);
  add_mlp(ckpt, "decoder", model.decoder);
  return ckpt;
}

AutoencoderModel autoencoder_from_checkpoint(const Checkpoint& ckpt) {
  try {
    if (ckpt.meta.at("kind").get<std::string>() != "autoencoder") throw FormatError("checkpoint is not an autoencoder");
    AutoencoderModel model;
    model.mode = parse_ae_mode(ckpt.meta.at("mode").get<std::string>());
    model.latent_dim = ckpt.meta.at("latent_dim").get<std::size_t>();
    model.beta = ckpt.meta.at("beta").get<double>();
    model.encoder = load_mlp(ckpt, "encoder", spec_from_json(ckpt.meta.at("encoder")));
    model.decoder = load_mlp(ckpt, "decoder", spec_from_json(ckpt.meta.at("decoder")));
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("autoencoder metadata is malformed: ") + e.what());
  } catch (const ContractError& e) {
    throw FormatError(std::string("autoencoder checkpoint is inconsistent: ") + e.what());
  }
}

Checkpoint to_checkpoint(const EnergyModel& model) {
  Checkpoint ckpt;
  ckpt.meta = json{{"kind", "energy"}, {"net", spec_to_json(model.net.spec)}};
  add_mlp(ckpt, "energy", model.net);
  return ckpt;
}

EnergyModel energy_model_from_checkpoint(const Checkpoint& ckpt) {
  try {
    if (ckpt.meta.at("kind").get<std::string>() != "energy") throw FormatError("checkpoint is not an energy model");
    EnergyModel model{load_mlp(ckpt, "energy", spec_from_json(ckpt.meta.at("net")))};
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("energy metadata is malformed: ") + e.what());
  } catch (const ContractError& e) {
    throw FormatError(std::string("energy checkpoint is inconsistent: ") + e.what());
  }
}

}  // namespace ltrans
