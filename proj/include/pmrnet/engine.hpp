#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pmrnet/data.hpp"
#include "pmrnet/loss.hpp"
#include "pmrnet/metrics.hpp"
#include "pmrnet/model.hpp"
#include "pmrnet/netconfig.hpp"

namespace pmrnet {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double total = 0.0;     // mean over the epoch's batches
  double bce = 0.0;
  double dice = 0.0;
  std::optional<double> val_acc;
  std::optional<double> val_auc;
  std::optional<double> val_iou;
};

struct TrainOptions {
  // Stop after this many optimizer steps (0 = run every epoch). A partial
  // final epoch is still recorded.
  std::size_t max_steps = 0;
  // Samples are brought to this extent before training when set.
  std::optional<Extent> input_extent;
  // Write best.ckpt / last.ckpt into TrainConfig::checkpoint_dir when it is
  // non-empty.
  bool save_checkpoints = true;
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(std::size_t step, const LossBreakdown&)> on_step;
};

struct TrainState {
  std::vector<EpochRecord> history;
  std::vector<LossBreakdown> step_losses;
  std::size_t steps = 0;
  std::optional<double> best_val_iou;
  std::size_t best_epoch = 0;
  std::optional<std::filesystem::path> best_checkpoint;
};

// Adam (beta1 = momentum, beta2 = 0.999, L2 weight decay) on total loss,
// batches drawn in a seeded per-epoch shuffle. Validation metrics are
// computed after every epoch when val is non-empty; the best validation IoU
// is checkpointed. NaNLossError aborts with the offending step.
TrainState train(SegmentationModel<float>& model, const Dataset& train_set,
                 const Dataset& val_set, const RunConfig& cfg,
                 const TrainOptions& options = {});

struct Prediction {
  Sample sample;                       // as fed to the model
  Tensor<float> probabilities;         // (1, 1, H, W)
  Tensor<std::uint8_t> mask;
};

// Per-image metrics in eval mode. on_prediction, when set, sees every
// prediction (used for overlays).
MetricsReport evaluate(SegmentationModel<float>& model, const Dataset& ds,
                       double threshold,
                       std::optional<Extent> input_extent = std::nullopt,
                       const std::function<void(const Prediction&)>& on_prediction = {});

// Bring a sample to the model's channel count and (optionally) extent.
Sample prepare_sample(const Sample& s, int channels, std::optional<Extent> extent);

struct InferenceTiming {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  std::vector<double> samples_ms;  // warm-up excluded
};

// Wall-clock single-image eval-mode forward passes.
template <typename T>
InferenceTiming measure_inference(SegmentationModel<T>& model, Extent extent,
                                  std::size_t reps, std::size_t warmup);

struct ModelSummary {
  int layers = 0;
  int branches = 0;
  std::size_t parameter_count = 0;
  InferenceTiming inference;
  Extent extent;
};

ModelSummary summarize(const NetworkConfig& cfg, Extent extent,
                       std::size_t reps, std::size_t warmup,
                       std::uint64_t seed = 0);

struct GradCheckOptions {
  std::size_t samples = 256;   // parameters compared
  double step = 1e-6;          // central difference step
  std::uint64_t seed = 0;
  std::size_t batch = 2;
  bool freeze_head = false;    // exclude head.* from the sample
  // Scale analytic gradients before comparing (negative control).
  double corrupt_scale = 1.0;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Evaluate finite differences on a long double copy of the model (same
  // parameters, same double-rounded theta +- h). The analytic side is always
  // the 64-bit model.
  bool extended_oracle = true;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t kinks_skipped = 0;
  std::string worst_parameter;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central finite differences of total loss against reverse-mode gradients of
// a double-precision model, in training mode. Samples whose perturbation
// flips a ReLU, max-pool or clamp branch are redrawn.
GradCheckResult grad_check(const NetworkConfig& cfg, Extent input,
                           const GradCheckOptions& options = {});

// history CSV: epoch,total,bce,dice,val_acc,val_auc,val_iou
std::string history_csv(const std::vector<EpochRecord>& history);
void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path);

struct AblationRow {
  Variant variant;
  std::size_t parameter_count = 0;
  double final_loss = 0.0;
  MetricsReport report;
};

// Train and evaluate every variant with identical settings and seed.
std::vector<AblationRow> run_ablation(const RunConfig& cfg,
                                      const Dataset& train_set,
                                      const Dataset& val_set,
                                      const Dataset& test_set,
                                      const TrainOptions& options);

// variant,parameters,final_loss,acc,auc,iou (means, %.3f)
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace pmrnet
