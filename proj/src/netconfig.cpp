#include "pmrnet/netconfig.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pmrnet/errors.hpp"

namespace pmrnet {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename I>
I parse_int(const std::string& key, const std::string& value) {
  I out{};
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("config: `" + key + "` expects an integer, got `" +
                      value + "`");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: `" + key + "` expects a number, got `" + value +
                    "`");
}

// Shortest text that parses back to the same double.
std::string format_real(double v) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

}  // namespace

std::string Role::to_string() const {
  return "(" + std::to_string(layer) + "," + std::to_string(branch) + ")";
}

int channels_at(const NetworkConfig& cfg, int layer) {
  if (layer < 1 || layer > cfg.num_layers) {
    throw RangeError("channels_at: layer " + std::to_string(layer) +
                     " outside [1, " + std::to_string(cfg.num_layers) + "]");
  }
  long channels = cfg.base_channels;
  for (int i = 1; i < layer; ++i) channels *= cfg.channel_growth;
  return static_cast<int>(channels);
}

std::size_t required_divisor(const NetworkConfig& cfg) {
  return std::size_t{1} << ((cfg.num_layers - 1) + (cfg.num_branches - 1));
}

Extent ValidatedConfig::extent_at(Role role) const {
  const std::size_t f = std::size_t{1} << (role.layer - 1 + role.branch);
  return {input.height / f, input.width / f};
}

ValidatedConfig validate_config(const NetworkConfig& cfg, Extent input) {
  if (cfg.num_layers < 2) {
    throw RangeError("num_layers must be >= 2, got " +
                     std::to_string(cfg.num_layers));
  }
  if (cfg.num_branches < 1) {
    throw RangeError("num_branches must be >= 1, got " +
                     std::to_string(cfg.num_branches));
  }
  if (cfg.num_layers + cfg.num_branches > 40) {
    throw RangeError("num_layers + num_branches too large");
  }
  if (cfg.base_channels < 1) throw RangeError("base_channels must be >= 1");
  if (cfg.channel_growth < 1) throw RangeError("channel_growth must be >= 1");
  if (cfg.in_channels < 1) throw RangeError("in_channels must be >= 1");
  if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0)) {
    throw RangeError("threshold must lie in [0, 1]");
  }
  if (!(cfg.smooth > 0.0)) throw RangeError("smooth must be > 0");
  if (cfg.context_convs < 1) throw RangeError("context_convs must be >= 1");

  ValidatedConfig v;
  v.config = cfg;
  v.input = input;
  v.divisor = required_divisor(cfg);
  if (input.height == 0 || input.width == 0 || input.height % v.divisor != 0 ||
      input.width % v.divisor != 0) {
    throw DivisibilityError("input " + input.to_string() +
                            " is not divisible by 2^((L-1)+(B-1)) = " +
                            std::to_string(v.divisor));
  }
  for (int i = 1; i <= cfg.num_layers; ++i) {
    for (int j = 0; j < cfg.num_branches; ++j) {
      const Role r{i, j};
      v.slots[r] = SlotSpec{v.extent_at(r), channels_at(cfg, i)};
    }
  }
  return v;
}

void validate_train_config(const TrainConfig& tc) {
  if (!(tc.learning_rate > 0.0)) throw RangeError("learning_rate must be > 0");
  if (tc.batch_size < 1) throw RangeError("batch_size must be >= 1");
  if (tc.max_epochs < 0) throw RangeError("max_epochs must be >= 0");
  if (tc.weight_decay < 0.0) throw RangeError("weight_decay must be >= 0");
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  NetworkConfig& n = cfg.network;
  TrainConfig& t = cfg.train;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected `key = value`");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key == "num_layers") n.num_layers = parse_int<int>(key, value);
    else if (key == "num_branches") n.num_branches = parse_int<int>(key, value);
    else if (key == "base_channels") n.base_channels = parse_int<int>(key, value);
    else if (key == "channel_growth") n.channel_growth = parse_int<int>(key, value);
    else if (key == "in_channels") n.in_channels = parse_int<int>(key, value);
    else if (key == "threshold") n.threshold = parse_real(key, value);
    else if (key == "smooth") n.smooth = parse_real(key, value);
    else if (key == "context_convs") n.context_convs = parse_int<int>(key, value);
    else if (key == "bce_log_base") {
      if (value == "e") n.bce_log_base = LogBase::natural;
      else if (value == "2") n.bce_log_base = LogBase::two;
      else throw ConfigError("config: `bce_log_base` must be `e` or `2`");
    }
    else if (key == "max_epochs") t.max_epochs = parse_int<int>(key, value);
    else if (key == "batch_size") t.batch_size = parse_int<int>(key, value);
    else if (key == "learning_rate") t.learning_rate = parse_real(key, value);
    else if (key == "momentum") t.momentum = parse_real(key, value);
    else if (key == "weight_decay") t.weight_decay = parse_real(key, value);
    else if (key == "seed") t.seed = parse_int<std::uint64_t>(key, value);
    else {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unknown key `" + key + "`");
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const RunConfig& cfg) {
  const NetworkConfig& n = cfg.network;
  const TrainConfig& t = cfg.train;
  std::ostringstream out;
  out << "num_layers = " << n.num_layers << '\n'
      << "num_branches = " << n.num_branches << '\n'
      << "base_channels = " << n.base_channels << '\n'
      << "channel_growth = " << n.channel_growth << '\n'
      << "in_channels = " << n.in_channels << '\n'
      << "threshold = " << format_real(n.threshold) << '\n'
      << "smooth = " << format_real(n.smooth) << '\n'
      << "max_epochs = " << t.max_epochs << '\n'
      << "batch_size = " << t.batch_size << '\n'
      << "learning_rate = " << format_real(t.learning_rate) << '\n'
      << "momentum = " << format_real(t.momentum) << '\n'
      << "weight_decay = " << format_real(t.weight_decay) << '\n'
      << "seed = " << t.seed << '\n';
  // Optional keys appear only when they differ from the defaults.
  const NetworkConfig defaults;
  if (n.context_convs != defaults.context_convs) {
    out << "context_convs = " << n.context_convs << '\n';
  }
  if (n.bce_log_base != defaults.bce_log_base) out << "bce_log_base = 2\n";
  return out.str();
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << to_text(cfg);
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_text(cfg)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pmrnet
