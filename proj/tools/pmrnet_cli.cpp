// pmrnet command-line front end: train, eval, predict, summary, ablate, synth.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmrnet/checkpoint.hpp"
#include "pmrnet/data.hpp"
#include "pmrnet/engine.hpp"
#include "pmrnet/errors.hpp"
#include "pmrnet/image_io.hpp"
#include "pmrnet/metrics.hpp"
#include "pmrnet/model.hpp"
#include "pmrnet/netconfig.hpp"
#include "pmrnet/plot.hpp"

namespace fs = std::filesystem;
using namespace pmrnet;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

// Bad invocation: missing files, unknown flags values, unsupported device.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Common {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  std::string pairs;
  std::string variant;
  std::string augment_test = "off";
  std::string augment_train = "on";
  std::string ids;
  std::size_t size = 0;
  std::size_t max_steps = 0;
  double split_ratio = 0.8;
  std::size_t n = 64;
  std::size_t reps = 5;
  std::size_t warmup = 2;
};

std::string now_iso() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

bool flag_on(const std::string& v, const char* name) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw UsageError(std::string("--") + name + " expects on or off, got '" + v + "'");
}

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (c.seed) cfg.train.seed = *c.seed;
  return cfg;
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw UsageError("--out is required");
  fs::create_directories(c.out);
  return c.out;
}

std::optional<Extent> size_option(const Common& c) {
  if (c.size == 0) return std::nullopt;
  return Extent{c.size, c.size};
}

class Manifest {
 public:
  Manifest(std::string command, const Common& c, int argc, char** argv)
      : command_(std::move(command)), common_(c), started_(now_iso()) {
    for (int i = 0; i < argc; ++i) argv_ += (i ? " " : "") + std::string(argv[i]);
  }
  void set_config(const RunConfig& cfg) { hash_ = config_hash(cfg); seed_ = cfg.train.seed; }
  void note(const std::string& key, const std::string& value) { extra_ += key + "=" + value + "\n"; }
  void write(const fs::path& out) const {
    std::ofstream f(out / "manifest.txt");
    f << "command=" << command_ << '\n'
      << "argv=" << argv_ << '\n'
      << "config=" << common_.config << '\n'
      << "config_hash=" << hash_ << '\n'
      << "seed=" << seed_ << '\n'
      << "out_dir=" << common_.out << '\n'
      << "device=cpu\n"
      << "started=" << started_ << '\n'
      << "finished=" << now_iso() << '\n'
      << extra_;
  }

 private:
  std::string command_;
  Common common_;
  std::string started_;
  std::string argv_;
  std::string hash_;
  std::uint64_t seed_ = 0;
  std::string extra_;
};

Dataset select_ids(const Dataset& ds, const std::string& ids_file) {
  if (ids_file.empty()) return ds;
  const auto ids = read_split_file(ids_file);
  return ds.subset(ids);
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

int cmd_train(const Common& c, Manifest& m) {
  const fs::path out = require_out(c);
  RunConfig cfg = resolve_config(c);
  m.set_config(cfg);
  cfg.train.checkpoint_dir = out / "checkpoints";
  validate_train_config(cfg.train);
  const Variant variant = c.variant.empty() ? default_variant(cfg.network) : parse_variant(c.variant);
  if (c.data.empty()) throw UsageError("--data is required");
  const Dataset ds = load_dataset(c.data);

  // Fail early on config/extent mismatches.
  const std::optional<Extent> extent = size_option(c);
  const Extent probe = extent ? *extent : ds.get(0).image.shape().extent();
  validate_config(cfg.network, probe);

  const SplitSpec outer = split(ds, c.split_ratio, cfg.train.seed);
  const SplitSpec inner = split_ids(outer.train_ids, 0.9, cfg.train.seed + 1);
  write_split_file(inner.train_ids, out / "train_ids.txt");
  write_split_file(inner.test_ids, out / "val_ids.txt");
  write_split_file(outer.test_ids, out / "test_ids.txt");

  Dataset train_set = ds.subset(inner.train_ids);
  if (flag_on(c.augment_train, "augment-train")) train_set = augment_dataset(train_set, cfg.train.seed);
  const Dataset val_set = ds.subset(inner.test_ids);

  auto model = build_variant<float>(cfg.network, variant, cfg.train.seed);
  std::printf("variant %s, %zu parameters, %zu train / %zu val / %zu test samples\n",
              std::string(variant_name(variant)).c_str(), model->count_params(),
              train_set.size(), val_set.size(), outer.test_ids.size());
  TrainOptions opts;
  opts.max_steps = c.max_steps;
  opts.input_extent = extent;
  opts.on_epoch = [](const EpochRecord& r) {
    std::printf("epoch %zu  loss %.5f (bce %.5f, dice %.5f)", r.epoch, r.total, r.bce, r.dice);
    if (r.val_iou) std::printf("  val iou %.3f", *r.val_iou);
    std::printf("\n");
    std::fflush(stdout);
  };
  const TrainState state = train(*model, train_set, val_set, cfg, opts);
  write_history_csv(state.history, out / "history.csv");
  std::vector<double> total, bce, dice;
  for (const auto& r : state.history) {
    total.push_back(r.total);
    bce.push_back(r.bce);
    dice.push_back(r.dice);
  }
  write_loss_plot(total, bce, dice, out / "loss.png");
  save_config(cfg, out / "config.txt");
  m.note("variant", std::string(variant_name(variant)));
  m.note("steps", std::to_string(state.steps));
  if (state.best_checkpoint) m.note("best_checkpoint", state.best_checkpoint->string());
  if (state.best_val_iou) m.note("best_val_iou", std::to_string(*state.best_val_iou));
  return 0;
}

int cmd_eval(const Common& c, Manifest& m) {
  require_file(c.checkpoint, "--checkpoint");
  const fs::path out = require_out(c);
  LoadedCheckpoint ck = load_checkpoint(c.checkpoint);
  m.set_config(ck.info.config);
  if (c.data.empty()) throw UsageError("--data is required");
  Dataset ds = select_ids(load_dataset(c.data), c.ids);
  if (flag_on(c.augment_test, "augment-test")) ds = augment_dataset(ds, ck.info.config.train.seed);
  fs::create_directories(out / "overlays");
  std::size_t overlays = 0;
  const MetricsReport r = evaluate(*ck.model, ds, ck.info.config.network.threshold, size_option(c),
                                   [&](const Prediction& p) {
                                     write_png(out / "overlays" / (p.sample.id + ".png"),
                                               overlay_panel(p.sample, p.mask));
                                     ++overlays;
                                   });
  write_metrics_csv(r, out / "metrics.csv");
  write_png(out / "metrics.png",
            plot_bars({r.acc.mean, r.auc ? r.auc->mean : 0.0, r.iou.mean},
                      {{60, 140, 90}, {70, 110, 180}, {200, 120, 40}}));
  std::printf("%s\n", format_summary(r).c_str());
  m.note("checkpoint", c.checkpoint);
  m.note("images", std::to_string(r.per_image.size()));
  m.note("overlays", std::to_string(overlays));
  return 0;
}

int cmd_predict(const Common& c, Manifest& m) {
  require_file(c.checkpoint, "--checkpoint");
  const fs::path out = require_out(c);
  LoadedCheckpoint ck = load_checkpoint(c.checkpoint);
  m.set_config(ck.info.config);
  if (c.data.empty()) throw UsageError("--data is required");
  fs::path images = fs::path(c.data) / "images";
  if (!fs::is_directory(images)) images = c.data;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  fs::create_directories(out / "masks");
  fs::create_directories(out / "probabilities");
  const int channels = ck.info.config.network.in_channels;
  for (const auto& f : files) {
    const Image8 img = read_png(f);
    Sample s{f.stem().string(),
             Tensor<float>(Shape{1, static_cast<std::size_t>(img.channels), img.height, img.width}),
             Tensor<std::uint8_t>(Shape{1, 1, img.height, img.width})};
    for (std::size_t ch = 0; ch < static_cast<std::size_t>(img.channels); ++ch)
      for (std::size_t p = 0; p < img.height * img.width; ++p)
        s.image.plane(0, ch)[p] = img.pixels[p * img.channels + ch] / 255.0f;
    s = prepare_sample(s, channels, size_option(c));
    const SegmentationOutput<float> pred = ck.model->predict(s.image);
    const Shape ps = pred.probabilities.shape();
    Image8 mask{ps.h, ps.w, 1, std::vector<std::uint8_t>(ps.plane())};
    Image8 prob{ps.h, ps.w, 1, std::vector<std::uint8_t>(ps.plane())};
    for (std::size_t p = 0; p < ps.plane(); ++p) {
      mask.pixels[p] = pred.mask[p] ? 255 : 0;
      prob.pixels[p] = static_cast<std::uint8_t>(std::lround(pred.probabilities[p] * 255.0f));
    }
    write_png(out / "masks" / (s.id + ".png"), mask);
    write_png(out / "probabilities" / (s.id + ".png"), prob);
  }
  std::printf("wrote %zu predictions to %s\n", files.size(), (out / "masks").c_str());
  m.note("checkpoint", c.checkpoint);
  m.note("images", std::to_string(files.size()));
  return 0;
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
  std::vector<std::pair<int, int>> pairs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument(item);
      std::size_t a = 0, b = 0;
      const int l = std::stoi(item.substr(0, colon), &a);
      const int br = std::stoi(item.substr(colon + 1), &b);
      if (a != colon || b != item.size() - colon - 1) throw std::invalid_argument(item);
      pairs.emplace_back(l, br);
    } catch (const std::exception&) {
      throw UsageError("--pairs expects L:B[,L:B...], got '" + item + "'");
    }
  }
  if (pairs.empty()) throw UsageError("--pairs is empty");
  return pairs;
}

int cmd_summary(const Common& c, Manifest& m) {
  const fs::path out = require_out(c);
  const RunConfig cfg = resolve_config(c);
  m.set_config(cfg);
  const auto pairs = parse_pairs(c.pairs.empty() ? "5:1,5:2,5:3,5:4,6:3" : c.pairs);
  const std::size_t hw = c.size ? c.size : 64;
  std::string csv = "layers,branches,parameters,parameters_m,inference_ms_mean,inference_ms_std,input\n";
  std::printf("%-7s %-9s %-14s %-22s\n", "Layers", "Branches", "Parameters/M", "Inference time/ms");
  for (const auto& [l, b] : pairs) {
    NetworkConfig net = cfg.network;
    net.num_layers = l;
    net.num_branches = b;
    validate_config(net, Extent{hw, hw});
    const ModelSummary s = summarize(net, Extent{hw, hw}, c.reps, c.warmup, cfg.train.seed);
    char row[256];
    std::snprintf(row, sizeof row, "%d,%d,%zu,%.2f,%.3f,%.3f,%zux%zu\n", l, b, s.parameter_count,
                  s.parameter_count / 1e6, s.inference.mean_ms, s.inference.std_ms, hw, hw);
    csv += row;
    std::printf("%-7d %-9d %-14.2f %.2f±%.2f\n", l, b, s.parameter_count / 1e6,
                s.inference.mean_ms, s.inference.std_ms);
    std::fflush(stdout);
  }
  write_text(out / "summary.csv", csv);
  m.note("pairs", c.pairs);
  m.note("input", std::to_string(hw));
  return 0;
}

int cmd_ablate(const Common& c, Manifest& m) {
  const fs::path out = require_out(c);
  const RunConfig cfg = resolve_config(c);
  m.set_config(cfg);
  if (c.data.empty()) throw UsageError("--data is required");
  const Dataset ds = load_dataset(c.data);
  const std::optional<Extent> extent = size_option(c);
  validate_config(cfg.network, extent ? *extent : ds.get(0).image.shape().extent());
  const SplitSpec outer = split(ds, c.split_ratio, cfg.train.seed);
  const SplitSpec inner = split_ids(outer.train_ids, 0.9, cfg.train.seed + 1);
  Dataset train_set = ds.subset(inner.train_ids);
  if (flag_on(c.augment_train, "augment-train")) train_set = augment_dataset(train_set, cfg.train.seed);
  Dataset test_set = ds.subset(outer.test_ids);
  if (flag_on(c.augment_test, "augment-test")) test_set = augment_dataset(test_set, cfg.train.seed);
  TrainOptions opts;
  opts.max_steps = c.max_steps;
  opts.input_extent = extent;
  const auto rows = run_ablation(cfg, train_set, ds.subset(inner.test_ids), test_set, opts);
  write_text(out / "ablation.csv", ablation_csv(rows));
  std::vector<double> ious;
  for (const auto& r : rows) {
    ious.push_back(r.report.iou.mean);
    std::printf("%-18s params %-10zu iou %s\n", std::string(variant_name(r.variant)).c_str(),
                r.parameter_count, format_mean_std(r.report.iou).c_str());
  }
  write_png(out / "ablation_iou.png", plot_bars(ious, {}));
  m.note("variants", std::to_string(rows.size()));
  return 0;
}

int cmd_synth(const Common& c, Manifest& m) {
  const fs::path out = require_out(c);
  const std::uint64_t seed = c.seed.value_or(0);
  const std::size_t hw = c.size ? c.size : 64;
  const SynthDataset s = synth_dataset(c.n, hw, seed);
  write_dataset(s.data, out);
  m.note("n", std::to_string(c.n));
  m.note("size", std::to_string(hw));
  m.note("synth_seed", std::to_string(seed));
  std::printf("wrote %zu samples of %zux%zu to %s\n", c.n, hw, hw, out.c_str());
  return 0;
}

void check_device() {
  const char* dev = std::getenv("PMRNET_DEVICE");
  if (!dev || !*dev) return;
  const std::string d = dev;
  if (d != "cpu") throw UsageError("PMRNET_DEVICE=" + d + " is not available (only cpu)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PMR-Net segmentation lab"};
  app.require_subcommand(1);
  Common c;

  auto add_config = [&](CLI::App* s) { s->add_option("--config", c.config, "Config file (key = value)"); };
  auto add_data = [&](CLI::App* s) { s->add_option("--data", c.data, "Dataset root with images/ and masks/"); };
  auto add_out = [&](CLI::App* s) { s->add_option("--out", c.out, "Output directory")->required(); };
  auto add_seed = [&](CLI::App* s) { s->add_option("--seed", c.seed, "Seed (overrides the config)"); };
  auto add_size = [&](CLI::App* s) { s->add_option("--size", c.size, "Resize inputs to SIZE x SIZE"); };
  auto add_aug = [&](CLI::App* s) {
    s->add_option("--augment-test", c.augment_test, "Augment the evaluation set x8 (on|off)");
    s->add_option("--augment-train", c.augment_train, "Augment the training set x8 (on|off)");
  };

  CLI::App* train = app.add_subcommand("train", "Train a model");
  add_config(train); add_data(train); add_out(train); add_seed(train); add_size(train); add_aug(train);
  train->add_option("--variant", c.variant, "Model variant");
  train->add_option("--max-steps", c.max_steps, "Stop after N optimizer steps");
  train->add_option("--split-ratio", c.split_ratio, "Train fraction of the train/test split");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", c.checkpoint, "Checkpoint file");
  add_config(eval); add_data(eval); add_out(eval); add_size(eval); add_aug(eval);
  eval->add_option("--ids", c.ids, "File with one sample id per line");

  CLI::App* predict = app.add_subcommand("predict", "Write predicted masks");
  predict->add_option("--checkpoint", c.checkpoint, "Checkpoint file");
  add_data(predict); add_out(predict); add_size(predict);

  CLI::App* summary = app.add_subcommand("summary", "Parameter count and inference time per (L, B)");
  add_config(summary); add_out(summary); add_seed(summary); add_size(summary);
  summary->add_option("--pairs", c.pairs, "L:B[,L:B...]");
  summary->add_option("--reps", c.reps, "Timed repetitions");
  summary->add_option("--warmup", c.warmup, "Discarded warm-up repetitions");

  CLI::App* ablate = app.add_subcommand("ablate", "Train and compare the five ablation variants");
  add_config(ablate); add_data(ablate); add_out(ablate); add_seed(ablate); add_size(ablate); add_aug(ablate);
  ablate->add_option("--max-steps", c.max_steps, "Stop each run after N optimizer steps");
  ablate->add_option("--split-ratio", c.split_ratio, "Train fraction of the train/test split");

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic shapes dataset");
  add_out(synth); add_seed(synth); add_size(synth);
  synth->add_option("--n", c.n, "Number of samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  Manifest manifest(chosen->get_name(), c, argc, argv);
  try {
    check_device();
    int rc = 0;
    if (chosen == train) rc = cmd_train(c, manifest);
    else if (chosen == eval) rc = cmd_eval(c, manifest);
    else if (chosen == predict) rc = cmd_predict(c, manifest);
    else if (chosen == summary) rc = cmd_summary(c, manifest);
    else if (chosen == ablate) rc = cmd_ablate(c, manifest);
    else rc = cmd_synth(c, manifest);
    manifest.write(c.out);
    return rc;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivisibilityError& e) {
    std::cerr << "DivisibilityError: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RangeError& e) {
    std::cerr << "RangeError: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "ConfigError: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UnknownVariantError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
