#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "pmrnet/checkpoint.hpp"
#include "pmrnet/engine.hpp"
#include "test_support.hpp"

namespace pmrnet {
namespace {

using testing::TempDir;

RunConfig small_run() {
  RunConfig r;
  r.network.num_layers = 3;
  r.network.num_branches = 2;
  r.network.base_channels = 4;
  r.train.max_epochs = 2;
  r.train.seed = 8;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

struct Trained {
  RunConfig cfg = small_run();
  Dataset data = synth_dataset(4, 32, 2).data;
  std::unique_ptr<SegmentationModel<float>> model;
  Trained() {
    model = build_model<float>(cfg.network, cfg.train.seed);
    TrainOptions opt;
    opt.save_checkpoints = false;
    train(*model, data, Dataset{}, cfg, opt);
  }
  CheckpointInfo info() const {
    CheckpointInfo i;
    i.config = cfg;
    i.variant = model->variant();
    i.epoch = 2;
    i.metrics = {{"val_iou", 0.25}, {"total", 1.125}};
    return i;
  }
};

TEST(Checkpoint, RoundTripIsBitIdentical) {
  TempDir dir("rt");
  Trained t;
  const auto path = dir.path() / "m.ckpt";
  save_checkpoint(*t.model, t.info(), path);
  auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.info.config, t.cfg);
  EXPECT_EQ(loaded.info.variant, t.model->variant());
  EXPECT_EQ(loaded.info.epoch, 2u);
  EXPECT_EQ(loaded.info.metrics.at("val_iou"), 0.25);
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    const Tensor<float> x = t.data.get(i).image;
    EXPECT_EQ(loaded.model->predict(x).probabilities, t.model->predict(x).probabilities);
  }
  for (const auto& e : t.model->params().entries()) {
    EXPECT_EQ(loaded.model->params().find(e.name)->value, e.var->value) << e.name;
  }
  // Restoring into a fresh model with a different seed reproduces it as well.
  auto other = build_model<float>(t.cfg.network, 99);
  restore_checkpoint(*other, path);
  const Tensor<float> x = t.data.get(0).image;
  EXPECT_EQ(other->predict(x).probabilities, t.model->predict(x).probabilities);
  // Saving the loaded model gives the same bytes.
  save_checkpoint(*loaded.model, loaded.info, dir.path() / "again.ckpt");
  EXPECT_EQ(slurp(dir.path() / "again.ckpt"), slurp(path));
}

TEST(Checkpoint, ManifestCarriesHashEpochAndMetrics) {
  TempDir dir("man");
  Trained t;
  const auto path = dir.path() / "m.ckpt";
  save_checkpoint(*t.model, t.info(), path);
  EXPECT_EQ(manifest_path(path), dir.path() / "m.ckpt.manifest.txt");
  const std::string m = slurp(manifest_path(path));
  EXPECT_NE(m.find(config_hash(t.cfg)), std::string::npos);
  EXPECT_NE(m.find("val_iou"), std::string::npos);
  EXPECT_NE(m.find("epoch"), std::string::npos);
  EXPECT_EQ(read_checkpoint_info(path).metrics.at("total"), 1.125);
}

TEST(Checkpoint, DamagedFilesAreRejected) {
  TempDir dir("bad");
  Trained t;
  const auto path = dir.path() / "m.ckpt";
  save_checkpoint(*t.model, t.info(), path);
  const std::string bytes = slurp(path);

  EXPECT_THROW(read_checkpoint_info(dir.path() / "missing.ckpt"), CheckpointError);

  const auto cut = dir.path() / "cut.ckpt";
  std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(load_checkpoint(cut), CheckpointError);

  std::string flipped = bytes;
  flipped[0] ^= 0x5a;
  const auto magic = dir.path() / "magic.ckpt";
  std::ofstream(magic, std::ios::binary) << flipped;
  EXPECT_THROW(read_checkpoint_info(magic), CheckpointError);

  RunConfig wider = t.cfg;
  wider.network.base_channels = 8;
  auto mismatched = build_model<float>(wider.network, 0);
  EXPECT_THROW(restore_checkpoint(*mismatched, path), CheckpointError);
  auto ed = build_variant<float>(t.cfg.network, Variant::pmr_enc_dec, 0);
  EXPECT_THROW(restore_checkpoint(*ed, path), CheckpointError);
}

}  // namespace
}  // namespace pmrnet
