#include "pmrnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "pmrnet/errors.hpp"

namespace pmrnet {

namespace {

constexpr char kMagic[8] = {'P', 'M', 'R', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : f_(path, std::ios::binary) {
    if (!f_) throw CheckpointError("cannot write " + path.string());
  }
  void raw(const void* p, std::size_t n) { f_.write(static_cast<const char*>(p), n); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void finish() {
    f_.flush();
    if (!f_) throw CheckpointError("write failed");
  }

 private:
  std::ofstream f_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : path_(path), f_(path, std::ios::binary) {
    if (!f_) throw CheckpointError("cannot open checkpoint " + path.string());
  }
  void raw(void* p, std::size_t n) {
    f_.read(static_cast<char*>(p), n);
    if (static_cast<std::size_t>(f_.gcount()) != n) {
      throw CheckpointError("truncated checkpoint " + path_.string());
    }
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1u << 24)) throw CheckpointError("corrupt checkpoint " + path_.string());
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

 private:
  std::filesystem::path path_;
  std::ifstream f_;
};

std::string metrics_text(const std::map<std::string, double>& metrics) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& [k, v] : metrics) os << k << '=' << v << '\n';
  return os.str();
}

std::map<std::string, double> parse_metrics(const std::string& text) {
  std::map<std::string, double> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return out;
}

CheckpointInfo read_header(Reader& r) {
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw CheckpointError("not a checkpoint file");
  }
  CheckpointInfo info;
  try {
    info.config = parse_config(r.str());
    info.variant = parse_variant(r.str());
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  info.epoch = r.u64();
  info.metrics = parse_metrics(r.str());
  return info;
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
  return checkpoint.string() + ".manifest.txt";
}

void save_checkpoint(const SegmentationModel<float>& model,
                     const CheckpointInfo& info,
                     const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    Writer w(path);
    w.raw(kMagic, sizeof kMagic);
    w.str(to_text(info.config));
    w.str(std::string(variant_name(info.variant)));
    w.u64(info.epoch);
    w.str(metrics_text(info.metrics));
    const auto& entries = model.params().entries();
    w.u64(entries.size());
    for (const auto& e : entries) {
      w.str(e.name);
      const Shape s = e.var->shape();
      w.u64(s.n);
      w.u64(s.c);
      w.u64(s.h);
      w.u64(s.w);
      w.raw(e.var->value.data(), e.var->value.size() * sizeof(float));
    }
    w.finish();
  }
  std::ofstream m(manifest_path(path));
  if (!m) throw CheckpointError("cannot write manifest for " + path.string());
  m << "checkpoint=" << path.filename().string() << '\n'
    << "config_hash=" << config_hash(info.config) << '\n'
    << "variant=" << variant_name(info.variant) << '\n'
    << "epoch=" << info.epoch << '\n'
    << "parameters=" << model.count_params() << '\n'
    << metrics_text(info.metrics);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  Reader r(path);
  return read_header(r);
}

void restore_checkpoint(SegmentationModel<float>& model,
                        const std::filesystem::path& path) {
  Reader r(path);
  const CheckpointInfo info = read_header(r);
  if (!(info.config.network == model.config())) {
    throw CheckpointError("checkpoint network config differs from the model");
  }
  if (info.variant != model.variant()) {
    throw CheckpointError("checkpoint variant " + std::string(variant_name(info.variant)) +
                          " differs from the model");
  }
  const std::uint64_t count = r.u64();
  const auto& entries = model.params().entries();
  if (count != entries.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) +
                          " entries, model has " + std::to_string(entries.size()));
  }
  for (const auto& e : entries) {
    const std::string name = r.str();
    if (name != e.name) {
      throw CheckpointError("checkpoint entry " + name + " where " + e.name + " expected");
    }
    Shape s;
    s.n = r.u64();
    s.c = r.u64();
    s.h = r.u64();
    s.w = r.u64();
    if (s != e.var->shape()) {
      throw CheckpointError("shape mismatch for " + name + ": " + s.to_string() +
                            " vs " + e.var->shape().to_string());
    }
    r.raw(e.var->value.data(), e.var->value.size() * sizeof(float));
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  LoadedCheckpoint out;
  out.info = read_checkpoint_info(path);
  out.model = build_variant<float>(out.info.config.network, out.info.variant, 0);
  restore_checkpoint(*out.model, path);
  return out;
}

}  // namespace pmrnet
