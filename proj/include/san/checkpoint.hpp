#pragma once

#include <cstdint>
#include <filesystem>

#include "san/nn.hpp"

namespace san::nn {

struct CheckpointInfo {
  std::uint64_t seed = 0;
  long long step = 0;
};

/// Writes `dir/manifest.json` plus one .sant file per parameter tensor.
/// Creates the directory if needed.
void save_checkpoint(const std::filesystem::path& dir, const Model& model, const CheckpointInfo& info);

struct LoadedCheckpoint {
  Model model;
  CheckpointInfo info;
};

/// Throws FormatError on a missing or inconsistent manifest.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace san::nn
