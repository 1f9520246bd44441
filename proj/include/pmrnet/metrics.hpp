#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmrnet/tensor.hpp"

// Pixel-wise segmentation metrics and their mean/std aggregation.
namespace pmrnet {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Throws ShapeError on size mismatch and NonBinaryError on values outside {0,1}.
ConfusionCounts confusion(std::span<const std::uint8_t> pred,
                          std::span<const std::uint8_t> gt);
ConfusionCounts confusion(const Tensor<std::uint8_t>& pred,
                          const Tensor<std::uint8_t>& gt);

// (tp + tn) / total; EmptyError when total == 0.
double accuracy(const ConfusionCounts& c);

// tp / (tp + fp + fn); 1.0 when both masks are empty (see iou_undefined).
double iou(const ConfusionCounts& c);
inline bool iou_undefined(const ConfusionCounts& c) {
  return c.tp + c.fp + c.fn == 0;
}

// Exact area under the ROC curve: descending sort, trapezoids over tie
// groups. DegenerateError when gt holds a single class.
template <typename P>
double roc_auc(std::span<const P> probs, std::span<const std::uint8_t> gt);

struct ImageMetrics {
  std::string id;
  double acc = 0.0;
  std::optional<double> auc;   // absent for single-class ground truth
  double iou = 0.0;
  bool empty_union = false;    // iou set to 1 by convention
};

template <typename P>
ImageMetrics image_metrics(std::string id, std::span<const P> probs,
                           std::span<const std::uint8_t> gt, double threshold);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

struct MetricsReport {
  std::vector<ImageMetrics> per_image;
  MeanStd acc;
  std::optional<MeanStd> auc;  // absent when every image lacked AUC
  MeanStd iou;
  std::size_t auc_absent = 0;
  std::size_t empty_union = 0;
};

// Arithmetic mean and population std; EmptyError on an empty list.
MeanStd mean_std(std::span<const double> values);
MetricsReport aggregate(std::vector<ImageMetrics> per_image);

// "0.811±0.138"
std::string format_mean_std(const MeanStd& m, int digits = 3);
// "acc 0.951±0.010  auc ...  iou ..."
std::string format_summary(const MetricsReport& r);

// Header image,acc,auc,iou; %.3f values; MEAN and STD rows. Absent AUCs are
// written as NA.
std::string metrics_csv(const MetricsReport& r);
void write_metrics_csv(const MetricsReport& r, const std::filesystem::path& path);

}  // namespace pmrnet
