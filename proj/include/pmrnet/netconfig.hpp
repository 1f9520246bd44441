#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "pmrnet/tensor.hpp"

namespace pmrnet {

// Position of a feature map in the network: layer i (1-based) and branch j
// (0 = full resolution).
struct Role {
  int layer = 1;
  int branch = 0;

  friend auto operator<=>(const Role&, const Role&) = default;
  std::string to_string() const;
};

enum class LogBase { natural, two };

struct NetworkConfig {
  int num_layers = 5;
  int num_branches = 3;
  int base_channels = 32;
  int channel_growth = 2;
  int in_channels = 3;
  double threshold = 0.5;
  double smooth = 1e-5;
  // conv-BN-ReLU units inside the context block; 1 gives the literal
  // single-RBC reading.
  int context_convs = 2;
  LogBase bce_log_base = LogBase::natural;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct TrainConfig {
  int max_epochs = 150;
  int batch_size = 4;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Everything a config file holds.
struct RunConfig {
  NetworkConfig network;
  TrainConfig train;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Channels at a layer: base * growth^(layer-1). Throws RangeError when the
// layer is outside [1, num_layers].
int channels_at(const NetworkConfig& cfg, int layer);

// 2^((L-1)+(B-1)): every accepted input height and width is a multiple.
std::size_t required_divisor(const NetworkConfig& cfg);

// Expected output of one feature map slot.
struct SlotSpec {
  Extent extent;
  int channels = 0;
};

struct ValidatedConfig {
  NetworkConfig config;
  Extent input;
  std::size_t divisor = 1;
  // Encoder pyramid (and decoder) slots, keyed by (layer, branch).
  std::map<Role, SlotSpec> slots;

  // input / 2^(layer-1+branch)
  Extent extent_at(Role role) const;
};

// Throws RangeError for out-of-range fields and DivisibilityError when the
// input extent is not a multiple of required_divisor.
ValidatedConfig validate_config(const NetworkConfig& cfg, Extent input);

void validate_train_config(const TrainConfig& tc);

// Flat `key = value` text, `#` starts a comment. Throws ConfigError on
// unknown keys or malformed values.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string to_text(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

// FNV-1a of the serialized config, hex encoded.
std::string config_hash(const RunConfig& cfg);

}  // namespace pmrnet
