#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "ipp/error.hpp"
#include "ipp/net.hpp"

namespace ipp {

/// A checkpoint directory holds `manifest.json` and a flat little-endian
/// float32 parameter blob.
struct CheckpointManifest {
  NetConfig architecture;
  int grid_dim = 0;
  int plane_layout_version = kPlaneLayoutVersion;
  int training_iteration = 0;
  std::size_t parameter_count = 0;
  std::string blob = "params.bin";
};

class CheckpointMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct LoadedCheckpoint {
  CheckpointManifest manifest;
  Network net;
};

void save_checkpoint(const std::filesystem::path& dir, const Network& net, int grid_dim,
                     int training_iteration);

/// Throws CheckpointMismatch when the manifest disagrees with the expected
/// grid size or architecture, or with the blob on disk.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir,
                                 std::optional<int> expected_grid_dim = std::nullopt,
                                 const NetConfig* expected_architecture = nullptr);

}  // namespace ipp
