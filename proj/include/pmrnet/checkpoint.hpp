#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "pmrnet/model.hpp"
#include "pmrnet/netconfig.hpp"

namespace pmrnet {

struct CheckpointInfo {
  RunConfig config;
  Variant variant = Variant::full;
  std::uint64_t epoch = 0;
  std::map<std::string, double> metrics;
};

// Binary file: magic, embedded config text, variant, epoch, then every
// parameter and buffer by name with its shape and raw float32 values. A text
// manifest (config hash, epoch, metrics) is written next to it as
// <path>.manifest.txt.
void save_checkpoint(const SegmentationModel<float>& model,
                     const CheckpointInfo& info,
                     const std::filesystem::path& path);

// CheckpointError on a missing, truncated or mismatched file.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

// Overwrite model state from a checkpoint; every entry must match by name
// and shape.
void restore_checkpoint(SegmentationModel<float>& model,
                        const std::filesystem::path& path);

struct LoadedCheckpoint {
  CheckpointInfo info;
  std::unique_ptr<SegmentationModel<float>> model;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);

}  // namespace pmrnet
