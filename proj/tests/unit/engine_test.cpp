#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "pmrnet/engine.hpp"
#include "test_support.hpp"

namespace pmrnet {
namespace {

RunConfig small_run(int layers = 3, int branches = 2, int base = 4) {
  RunConfig r;
  r.network.num_layers = layers;
  r.network.num_branches = branches;
  r.network.base_channels = base;
  r.train.batch_size = 4;
  r.train.max_epochs = 1;
  r.train.seed = 5;
  return r;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

TEST(Train, OneEpochSmoke) {
  const RunConfig cfg = small_run();
  const auto data = synth_dataset(8, 32, 0).data;
  auto model = build_model<float>(cfg.network, cfg.train.seed);
  const auto state = train(*model, data, Dataset{}, cfg);
  ASSERT_EQ(state.history.size(), 1u);
  EXPECT_EQ(state.history[0].epoch, 1u);
  EXPECT_EQ(state.steps, 2u);
  EXPECT_TRUE(std::isfinite(state.history[0].total));
  EXPECT_DOUBLE_EQ(state.history[0].total,
                   0.5 * state.history[0].bce + state.history[0].dice);
  EXPECT_FALSE(state.history[0].val_iou.has_value());
}

TEST(Train, IdenticalSeedsGiveIdenticalLosses) {
  RunConfig cfg = small_run();
  cfg.train.max_epochs = 2;
  const auto data = synth_dataset(8, 32, 1).data;
  auto run = [&] {
    auto m = build_model<float>(cfg.network, cfg.train.seed);
    return train(*m, data, Dataset{}, cfg);
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.step_losses.size(), b.step_losses.size());
  for (std::size_t k = 0; k < a.step_losses.size(); ++k) {
    EXPECT_NEAR(a.step_losses[k].total, b.step_losses[k].total, 1e-6);
  }
  EXPECT_NEAR(a.history[0].total, b.history[0].total, 1e-6);
}

TEST(Train, LossFallsOverTenEpochs) {
  RunConfig cfg = small_run(3, 2, 8);
  cfg.train.max_epochs = 10;
  cfg.train.learning_rate = 1e-3;
  const auto data = synth_dataset(8, 32, 2).data;
  auto m = build_model<float>(cfg.network, cfg.train.seed);
  std::size_t epochs_seen = 0;
  TrainOptions opt;
  opt.on_epoch = [&](const EpochRecord&) { ++epochs_seen; };
  const auto state = train(*m, data, data, cfg, opt);
  ASSERT_EQ(state.history.size(), 10u);
  EXPECT_EQ(epochs_seen, 10u);
  EXPECT_LT(state.history[9].total, state.history[0].total);
  for (const auto& e : state.history) {
    EXPECT_TRUE(e.val_iou.has_value());
    EXPECT_TRUE(e.val_acc.has_value());
  }
  ASSERT_TRUE(state.best_val_iou.has_value());
  EXPECT_GE(state.best_epoch, 1u);
}

TEST(Train, MaxStepsStopsEarly) {
  RunConfig cfg = small_run();
  cfg.train.max_epochs = 5;
  const auto data = synth_dataset(8, 32, 3).data;
  auto m = build_model<float>(cfg.network, cfg.train.seed);
  TrainOptions opt;
  opt.max_steps = 3;
  const auto state = train(*m, data, Dataset{}, cfg, opt);
  EXPECT_EQ(state.steps, 3u);
  EXPECT_EQ(state.history.size(), 2u);
}

TEST(Train, NanInputAbortsWithDiagnostics) {
  RunConfig cfg = small_run();
  auto s = synth_dataset(4, 32, 4).data;
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < s.size(); ++i) samples.push_back(s.get(i));
  samples[1].image[17] = std::numeric_limits<float>::quiet_NaN();
  auto m = build_model<float>(cfg.network, cfg.train.seed);
  try {
    train(*m, Dataset::in_memory(samples), Dataset{}, cfg);
    FAIL() << "expected NaNLossError";
  } catch (const NaNLossError& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
  }
}

TEST(Train, WritesBestAndLastCheckpoints) {
  testing::TempDir dir("ckpt");
  RunConfig cfg = small_run();
  cfg.train.max_epochs = 2;
  cfg.train.checkpoint_dir = dir.path();
  const auto data = synth_dataset(4, 32, 5).data;
  auto m = build_model<float>(cfg.network, cfg.train.seed);
  const auto state = train(*m, data, data, cfg);
  ASSERT_TRUE(state.best_checkpoint.has_value());
  EXPECT_TRUE(std::filesystem::exists(*state.best_checkpoint));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "last.ckpt"));
}

TEST(Evaluate, UntrainedIsNearChanceAndRepeatable) {
  const RunConfig cfg = small_run(3, 2, 4);
  const auto data = synth_dataset(6, 32, 6).data;
  auto m = build_model<float>(cfg.network, 12);
  const auto a = evaluate(*m, data, 0.5);
  const auto b = evaluate(*m, data, 0.5);
  ASSERT_TRUE(a.auc.has_value());
  EXPECT_GE(a.auc->mean, 0.3);
  EXPECT_LE(a.auc->mean, 0.7);
  EXPECT_EQ(metrics_csv(a), metrics_csv(b));
  ASSERT_EQ(a.per_image.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(a.per_image[i].iou, b.per_image[i].iou);
    EXPECT_EQ(a.per_image[i].auc, b.per_image[i].auc);
  }
  std::size_t seen = 0;
  evaluate(*m, data, 0.5, Extent{64, 64}, [&](const Prediction& p) {
    EXPECT_EQ(p.probabilities.shape(), (Shape{1, 1, 64, 64}));
    ++seen;
  });
  EXPECT_EQ(seen, 6u);
  EXPECT_NE(format_summary(a).find("±"), std::string::npos);
}

TEST(Inference, TimingContract) {
  NetworkConfig shallow = small_run(3, 3, 8).network;
  NetworkConfig deep = small_run(5, 3, 8).network;
  auto a = build_model<float>(shallow, 0);
  auto b = build_model<float>(deep, 0);
  const auto ta = measure_inference(*a, {128, 128}, 10, 3);
  const auto tb = measure_inference(*b, {128, 128}, 10, 3);
  EXPECT_EQ(ta.samples_ms.size(), 10u);
  EXPECT_EQ(tb.samples_ms.size(), 10u);
  EXPECT_LT(ta.mean_ms, tb.mean_ms);
  EXPECT_LT(ta.std_ms / ta.mean_ms, 0.5);
  EXPECT_LT(tb.std_ms / tb.mean_ms, 0.5);
  const auto s = summarize(shallow, {64, 64}, 2, 1);
  EXPECT_EQ(s.parameter_count, a->count_params());
  EXPECT_EQ(s.layers, 3);
  EXPECT_EQ(s.branches, 3);
  EXPECT_EQ(s.inference.samples_ms.size(), 2u);
}

TEST(GradCheck, SmallNetworkPassesAndCorruptionIsFlagged) {
  const NetworkConfig c = small_run(3, 2, 4).network;
  GradCheckOptions opt;
  const auto r = grad_check(c, {16, 16}, opt);
  EXPECT_GE(r.checked, 200u);
  EXPECT_LT(r.max_rel_err, 1e-6) << r.worst_parameter;

  opt.freeze_head = true;
  opt.seed = 1;
  const auto frozen = grad_check(c, {16, 16}, opt);
  EXPECT_LT(frozen.max_rel_err, 1e-6) << frozen.worst_parameter;
  EXPECT_EQ(frozen.worst_parameter.rfind("head.", 0), std::string::npos);

  opt.freeze_head = false;
  opt.corrupt_scale = 1.1;
  opt.samples = 32;
  EXPECT_GT(grad_check(c, {16, 16}, opt).max_rel_err, 1e-2);
}

TEST(HistoryCsv, HeaderAndRows) {
  std::vector<EpochRecord> h{{1, 0.9, 0.6, 0.6, 0.8, std::nullopt, 0.5},
                             {2, 0.7, 0.4, 0.5, std::nullopt, std::nullopt, std::nullopt}};
  const auto lines = lines_of(history_csv(h));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "epoch,total,bce,dice,val_acc,val_auc,val_iou");
  EXPECT_EQ(lines[1].rfind("1,", 0), 0u);
  EXPECT_EQ(lines[2].rfind("2,", 0), 0u);
}

TEST(Ablation, EveryVariantInOrderWithCsv) {
  RunConfig cfg = small_run(3, 3, 2);
  const auto data = synth_dataset(4, 32, 7).data;
  TrainOptions opt;
  opt.max_steps = 1;
  opt.save_checkpoints = false;
  const auto rows = run_ablation(cfg, data, Dataset{}, data, opt);
  ASSERT_EQ(rows.size(), kAllVariants.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].variant, kAllVariants[i]);
    EXPECT_GT(rows[i].parameter_count, 0u);
    EXPECT_EQ(rows[i].report.per_image.size(), 4u);
  }
  const auto lines = lines_of(ablation_csv(rows));
  ASSERT_EQ(lines.size(), rows.size() + 1);
  EXPECT_EQ(lines[0], "variant,parameters,final_loss,acc,auc,iou");
  EXPECT_EQ(lines[1].rfind("baseline,", 0), 0u);
  EXPECT_EQ(lines[5].rfind("full,", 0), 0u);
}

}  // namespace
}  // namespace pmrnet
