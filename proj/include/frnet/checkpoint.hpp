#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "frnet/loss.hpp"
#include "frnet/net.hpp"

namespace frnet {

/// Training context stored beside the weights so inference can rebuild the
/// exact preprocessing.
struct CheckpointMeta {
  LossVariant variant = LossVariant::frnet;
  LossConfig loss;
  double scale = 1.0;              // normalization divisor
  std::size_t patch_stride = 0;
  std::map<std::string, std::string> extra;  // free-form run facts (epochs, lr, ...)
};

struct Checkpoint {
  UNetParams<float> params;
  CheckpointMeta meta;
};

/// Path of the raw weight blob that accompanies a manifest.
std::filesystem::path weights_path(const std::filesystem::path& manifest_path);

/// Writes `manifest_path` (key=value text) and `<manifest_path>.weights`
/// (little-endian float32, manifest order: per layer weights then bias).
void save_checkpoint(const std::filesystem::path& manifest_path, const UNetParams<float>& params,
                     const CheckpointMeta& meta);

/// Rebuilds the layer manifest from the stored config, compares it with the
/// stored layer list and checks the blob byte count before reading.
Checkpoint load_checkpoint(const std::filesystem::path& manifest_path);

/// Parses a key=value file; blank lines and lines starting with '#' are ignored.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

}  // namespace frnet
