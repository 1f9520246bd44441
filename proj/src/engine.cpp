#include "pmrnet/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "pmrnet/checkpoint.hpp"
#include "pmrnet/errors.hpp"
#include "pmrnet/optimizer.hpp"

namespace pmrnet {

Sample prepare_sample(const Sample& s, int channels, std::optional<Extent> extent) {
  Sample out = match_channels(s, channels);
  if (extent) out = resize_sample(out, *extent);
  return out;
}

namespace {

std::vector<Sample> prepared(const Dataset& ds, int channels,
                             std::optional<Extent> extent) {
  std::vector<Sample> out;
  out.reserve(ds.size());
  for (const auto& id : ds.ids()) out.push_back(prepare_sample(ds.get(id), channels, extent));
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

TrainState train(SegmentationModel<float>& model, const Dataset& train_set,
                 const Dataset& val_set, const RunConfig& cfg,
                 const TrainOptions& options) {
  validate_train_config(cfg.train);
  if (train_set.empty()) throw EmptyError("train: empty training set");
  const NetworkConfig& net = model.config();
  const std::vector<Sample> samples = prepared(train_set, net.in_channels, options.input_extent);

  AdamSettings settings;
  settings.learning_rate = cfg.train.learning_rate;
  settings.beta1 = cfg.train.momentum;
  settings.weight_decay = cfg.train.weight_decay;
  Adam<float> optimizer(model.params(), settings);

  std::mt19937_64 shuffle_rng(cfg.train.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t batch = static_cast<std::size_t>(cfg.train.batch_size);
  const bool checkpoints = options.save_checkpoints && !cfg.train.checkpoint_dir.empty();

  TrainState state;
  std::vector<std::size_t> order(samples.size());
  for (int epoch = 1; epoch <= cfg.train.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec;
    rec.epoch = static_cast<std::size_t>(epoch);
    std::size_t batches = 0;
    bool stop = false;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::vector<Sample> chunk;
      for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k) {
        chunk.push_back(samples[order[k]]);
      }
      const SampleBatch b = make_batch(chunk);
      const Tensor<float> target = b.masks.cast<float>();

      model.params().zero_grad();
      const Var<float> probs = model.probabilities(b.images, true);
      const LossVars<float> loss = total_loss(probs, target, net.smooth, net.bce_log_base);
      const LossBreakdown bd = loss.breakdown();
      if (!std::isfinite(bd.total)) {
        throw NaNLossError("non-finite loss at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(state.steps + 1) +
                           " (bce " + fmt("%g", bd.bce) + ", dice " + fmt("%g", bd.dice) +
                           ", batch " + b.ids.front() + "...)");
      }
      backward(loss.total);
      optimizer.step();
      ++state.steps;
      ++batches;
      rec.total += bd.total;
      rec.bce += bd.bce;
      rec.dice += bd.dice;
      state.step_losses.push_back(bd);
      if (options.on_step) options.on_step(state.steps, bd);
      if (options.max_steps && state.steps >= options.max_steps) {
        stop = true;
        break;
      }
    }
    rec.total /= static_cast<double>(batches);
    rec.bce /= static_cast<double>(batches);
    rec.dice /= static_cast<double>(batches);

    if (!val_set.empty()) {
      const MetricsReport r = evaluate(model, val_set, net.threshold, options.input_extent);
      rec.val_acc = r.acc.mean;
      if (r.auc) rec.val_auc = r.auc->mean;
      rec.val_iou = r.iou.mean;
    }
    state.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    if (checkpoints) {
      CheckpointInfo info{cfg, model.variant(), rec.epoch, {}};
      info.metrics["total"] = rec.total;
      info.metrics["bce"] = rec.bce;
      info.metrics["dice"] = rec.dice;
      if (rec.val_iou) info.metrics["val_iou"] = *rec.val_iou;
      if (rec.val_acc) info.metrics["val_acc"] = *rec.val_acc;
      if (rec.val_auc) info.metrics["val_auc"] = *rec.val_auc;
      // Without a validation set the latest epoch counts as best.
      const bool better = !rec.val_iou || !state.best_val_iou || *rec.val_iou > *state.best_val_iou;
      if (better) {
        state.best_checkpoint = cfg.train.checkpoint_dir / "best.ckpt";
        save_checkpoint(model, info, *state.best_checkpoint);
      }
      save_checkpoint(model, info, cfg.train.checkpoint_dir / "last.ckpt");
    }
    if (rec.val_iou && (!state.best_val_iou || *rec.val_iou > *state.best_val_iou)) {
      state.best_val_iou = rec.val_iou;
      state.best_epoch = rec.epoch;
    }
    if (stop) break;
  }
  return state;
}

MetricsReport evaluate(SegmentationModel<float>& model, const Dataset& ds,
                       double threshold, std::optional<Extent> input_extent,
                       const std::function<void(const Prediction&)>& on_prediction) {
  if (ds.empty()) throw EmptyError("evaluate: empty dataset");
  NoGradGuard guard;
  std::vector<ImageMetrics> per_image;
  for (const auto& id : ds.ids()) {
    Prediction p;
    p.sample = prepare_sample(ds.get(id), model.config().in_channels, input_extent);
    p.probabilities = model.probabilities(p.sample.image, false)->value;
    p.mask = binarize(p.probabilities, threshold);
    per_image.push_back(image_metrics<float>(id, p.probabilities.values(),
                                             p.sample.mask.values(), threshold));
    if (on_prediction) on_prediction(p);
  }
  return aggregate(std::move(per_image));
}

template <typename T>
InferenceTiming measure_inference(SegmentationModel<T>& model, Extent extent,
                                  std::size_t reps, std::size_t warmup) {
  if (reps == 0) throw RangeError("measure_inference: reps must be >= 1");
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<T> x(Shape{1, static_cast<std::size_t>(model.config().in_channels),
                    extent.height, extent.width});
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = static_cast<T>(u(rng));
  NoGradGuard guard;
  for (std::size_t k = 0; k < warmup; ++k) model.probabilities(x, false);
  InferenceTiming t;
  for (std::size_t k = 0; k < reps; ++k) {
    const auto a = std::chrono::steady_clock::now();
    model.probabilities(x, false);
    const auto b = std::chrono::steady_clock::now();
    t.samples_ms.push_back(std::chrono::duration<double, std::milli>(b - a).count());
  }
  const MeanStd m = mean_std(t.samples_ms);
  t.mean_ms = m.mean;
  t.std_ms = m.std;
  return t;
}

ModelSummary summarize(const NetworkConfig& cfg, Extent extent, std::size_t reps,
                       std::size_t warmup, std::uint64_t seed) {
  auto model = build_model<float>(cfg, seed);
  ModelSummary s;
  s.layers = cfg.num_layers;
  s.branches = cfg.num_branches;
  s.parameter_count = model->count_params();
  s.extent = extent;
  if (reps > 0) s.inference = measure_inference(*model, extent, reps, warmup);
  return s;
}

GradCheckResult grad_check(const NetworkConfig& cfg, Extent input,
                           const GradCheckOptions& options) {
  auto model = build_model<double>(cfg, options.seed);
  std::mt19937_64 rng(options.seed + 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<double> images(Shape{options.batch, static_cast<std::size_t>(cfg.in_channels),
                              input.height, input.width});
  for (std::size_t k = 0; k < images.size(); ++k) images[k] = u(rng);
  Tensor<double> target(Shape{options.batch, 1, input.height, input.width});
  for (std::size_t k = 0; k < target.size(); ++k) target[k] = u(rng) < 0.5 ? 1.0 : 0.0;

  // Finite-difference side. With the extended oracle, a long double copy of
  // the model is perturbed instead, so forward rounding (about 1e-16 of the
  // loss, i.e. 5e-11 in the quotient at h = 1e-6) does not mask the check.
  std::unique_ptr<SegmentationModel<long double>> oracle;
  Tensor<long double> images_ld, target_ld;
  if (options.extended_oracle) {
    oracle = build_model<long double>(cfg, options.seed);
    copy_state(model->params(), oracle->params());
    images_ld = images.cast<long double>();
    target_ld = target.cast<long double>();
  }
  auto loss_of = [&](std::uint64_t& signature) {
    NoGradGuard guard;
    KinkTrace trace;
    ScopedKinkTrace scope(trace);
    long double f;
    if (oracle) {
      const Var<long double> probs = oracle->probabilities(images_ld, true);
      f = total_loss_extended(probs->value, target_ld, cfg.smooth, cfg.bce_log_base);
    } else {
      const Var<double> probs = model->probabilities(images, true);
      f = total_loss_extended(probs->value, target, cfg.smooth, cfg.bce_log_base);
    }
    signature = trace.signature();
    return f;
  };

  model->params().zero_grad();
  std::uint64_t base_sig = 0;
  {
    KinkTrace trace;
    ScopedKinkTrace scope(trace);
    const Var<double> probs = model->probabilities(images, true);
    const LossVars<double> loss = total_loss(probs, target, cfg.smooth, cfg.bce_log_base);
    base_sig = trace.signature();
    backward(loss.total);
  }
  if (oracle) loss_of(base_sig);

  struct Candidate {
    std::string name;
    Var<double> var;
    Var<long double> oracle_var;
  };
  std::vector<Candidate> pool;
  std::vector<std::size_t> offsets{0};
  for (const auto& e : model->params().parameters()) {
    if (options.freeze_head && e.name.rfind("head.", 0) == 0) continue;
    pool.push_back({e.name, e.var, oracle ? oracle->params().find(e.name) : nullptr});
    offsets.push_back(offsets.back() + e.var->value.size());
  }
  const std::size_t total = offsets.back();
  if (total == 0) throw EmptyError("grad_check: no parameters to check");

  GradCheckResult result;
  std::set<std::size_t> seen;
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  const std::size_t wanted = std::min(options.samples, total);
  const std::size_t max_attempts = 50 * wanted + 1000;
  const double h = options.step;
  for (std::size_t attempt = 0; result.checked < wanted && attempt < max_attempts; ++attempt) {
    const std::size_t global = pick(rng);
    if (!seen.insert(global).second) continue;
    const std::size_t idx =
        std::upper_bound(offsets.begin(), offsets.end(), global) - offsets.begin() - 1;
    Candidate& c = pool[idx];
    const std::size_t k = global - offsets[idx];
    Node<double>& node = *c.var;
    const double theta = node.value[k];
    const double analytic =
        (node.grad.empty() ? 0.0 : node.grad[k]) * options.corrupt_scale;

    std::uint64_t sig_plus = 0, sig_minus = 0;
    auto set = [&](double v) {
      if (oracle) c.oracle_var->value[k] = v;
      else node.value[k] = v;
    };
    set(theta + h);
    const long double f_plus = loss_of(sig_plus);
    set(theta - h);
    const long double f_minus = loss_of(sig_minus);
    set(theta);
    if (sig_plus != base_sig || sig_minus != base_sig) {
      ++result.kinks_skipped;
      continue;
    }
    // The step actually taken, after rounding theta +- h to double.
    const long double taken = static_cast<long double>(theta + h) - static_cast<long double>(theta - h);
    const double numeric = static_cast<double>((f_plus - f_minus) / taken);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++result.checked;
    if (result.checked == 1 || rel > result.max_rel_err) {
      result.max_rel_err = rel;
      result.worst_parameter = c.name + "[" + std::to_string(k) + "]";
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,total,bce,dice,val_acc,val_auc,val_iou\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? fmt("%.6f", *v) : std::string("NA");
  };
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + fmt("%.9g", r.total) + "," +
           fmt("%.9g", r.bce) + "," + fmt("%.9g", r.dice) + "," + opt(r.val_acc) +
           "," + opt(r.val_auc) + "," + opt(r.val_iou) + "\n";
  }
  return out;
}

void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << history_csv(history);
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const Dataset& train_set,
                                      const Dataset& val_set, const Dataset& test_set,
                                      const TrainOptions& options) {
  std::vector<AblationRow> rows;
  for (Variant v : kAllVariants) {
    auto model = build_variant<float>(cfg.network, v, cfg.train.seed);
    TrainOptions opts = options;
    opts.save_checkpoints = false;
    const TrainState state = train(*model, train_set, val_set, cfg, opts);
    AblationRow row{v, model->count_params(), state.history.back().total,
                    evaluate(*model, test_set, cfg.network.threshold, options.input_extent)};
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,parameters,final_loss,acc,auc,iou\n";
  for (const auto& r : rows) {
    out += std::string(variant_name(r.variant)) + "," + std::to_string(r.parameter_count) +
           "," + fmt("%.6f", r.final_loss) + "," + fmt("%.3f", r.report.acc.mean) + "," +
           (r.report.auc ? fmt("%.3f", r.report.auc->mean) : std::string("NA")) + "," +
           fmt("%.3f", r.report.iou.mean) + "\n";
  }
  return out;
}

template InferenceTiming measure_inference<float>(SegmentationModel<float>&, Extent,
                                                  std::size_t, std::size_t);
template InferenceTiming measure_inference<double>(SegmentationModel<double>&, Extent,
                                                   std::size_t, std::size_t);

}  // namespace pmrnet
