#include "pmrnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "pmrnet/errors.hpp"

namespace pmrnet {

ConfusionCounts confusion(std::span<const std::uint8_t> pred,
                          std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size()) {
    throw ShapeError("confusion: " + std::to_string(pred.size()) + " vs " +
                     std::to_string(gt.size()) + " pixels");
  }
  ConfusionCounts c;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const std::uint8_t p = pred[k];
    const std::uint8_t g = gt[k];
    if (p > 1 || g > 1) {
      throw NonBinaryError("confusion: non-binary value at pixel " + std::to_string(k));
    }
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ConfusionCounts confusion(const Tensor<std::uint8_t>& pred,
                          const Tensor<std::uint8_t>& gt) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError("confusion: " + pred.shape().to_string() + " vs " +
                     gt.shape().to_string());
  }
  return confusion(pred.values(), gt.values());
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw EmptyError("accuracy: no pixels");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double iou(const ConfusionCounts& c) {
  const std::uint64_t uni = c.tp + c.fp + c.fn;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(uni);
}

template <typename P>
double roc_auc(std::span<const P> probs, std::span<const std::uint8_t> gt) {
  if (probs.size() != gt.size()) {
    throw ShapeError("roc_auc: " + std::to_string(probs.size()) + " vs " +
                     std::to_string(gt.size()) + " pixels");
  }
  std::uint64_t positives = 0;
  for (auto g : gt) {
    if (g > 1) throw NonBinaryError("roc_auc: non-binary ground truth");
    positives += g;
  }
  const std::uint64_t negatives = gt.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DegenerateError("roc_auc: ground truth has a single class");
  }
  std::vector<std::uint32_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return probs[a] > probs[b]; });
  // Twice the area in units of one positive x one negative; integral, so exact.
  std::uint64_t twice_area = 0;
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    std::uint64_t dtp = 0, dfp = 0;
    const P v = probs[order[k]];
    while (k < order.size() && probs[order[k]] == v) {
      if (gt[order[k]]) ++dtp;
      else ++dfp;
      ++k;
    }
    twice_area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
  }
  return static_cast<double>(twice_area) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

template <typename P>
ImageMetrics image_metrics(std::string id, std::span<const P> probs,
                           std::span<const std::uint8_t> gt, double threshold) {
  std::vector<std::uint8_t> mask(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    mask[k] = static_cast<double>(probs[k]) >= threshold ? 1 : 0;
  }
  const ConfusionCounts c = confusion(mask, gt);
  ImageMetrics m;
  m.id = std::move(id);
  m.acc = accuracy(c);
  m.iou = iou(c);
  m.empty_union = iou_undefined(c);
  try {
    m.auc = roc_auc(probs, gt);
  } catch (const DegenerateError&) {
    m.auc.reset();
  }
  return m;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw EmptyError("mean_std: no values");
  MeanStd m;
  m.count = values.size();
  const double n = static_cast<double>(values.size());
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(ss / n);
  return m;
}

MetricsReport aggregate(std::vector<ImageMetrics> per_image) {
  if (per_image.empty()) throw EmptyError("aggregate: no images");
  MetricsReport r;
  std::vector<double> acc, auc, iou_values;
  for (const auto& m : per_image) {
    acc.push_back(m.acc);
    iou_values.push_back(m.iou);
    if (m.auc) auc.push_back(*m.auc);
    else ++r.auc_absent;
    if (m.empty_union) ++r.empty_union;
  }
  r.acc = mean_std(acc);
  r.iou = mean_std(iou_values);
  if (!auc.empty()) r.auc = mean_std(auc);
  r.per_image = std::move(per_image);
  return r;
}

namespace {

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_mean_std(const MeanStd& m, int digits) {
  return fixed(m.mean, digits) + "±" + fixed(m.std, digits);
}

std::string format_summary(const MetricsReport& r) {
  std::string s = "acc " + format_mean_std(r.acc);
  s += "  auc " + (r.auc ? format_mean_std(*r.auc) : std::string("NA"));
  s += "  iou " + format_mean_std(r.iou);
  s += "  (n=" + std::to_string(r.per_image.size());
  if (r.auc_absent) s += ", auc absent " + std::to_string(r.auc_absent);
  if (r.empty_union) s += ", empty union " + std::to_string(r.empty_union);
  return s + ")";
}

std::string metrics_csv(const MetricsReport& r) {
  std::string out = "image,acc,auc,iou\n";
  for (const auto& m : r.per_image) {
    out += m.id + "," + fixed(m.acc) + "," + (m.auc ? fixed(*m.auc) : "NA") +
           "," + fixed(m.iou) + "\n";
  }
  out += "MEAN," + fixed(r.acc.mean) + "," + (r.auc ? fixed(r.auc->mean) : "NA") +
         "," + fixed(r.iou.mean) + "\n";
  out += "STD," + fixed(r.acc.std) + "," + (r.auc ? fixed(r.auc->std) : "NA") +
         "," + fixed(r.iou.std) + "\n";
  return out;
}

void write_metrics_csv(const MetricsReport& r, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << metrics_csv(r);
}

template double roc_auc<float>(std::span<const float>, std::span<const std::uint8_t>);
template double roc_auc<double>(std::span<const double>, std::span<const std::uint8_t>);
template ImageMetrics image_metrics<float>(std::string, std::span<const float>,
                                           std::span<const std::uint8_t>, double);
template ImageMetrics image_metrics<double>(std::string, std::span<const double>,
                                            std::span<const std::uint8_t>, double);

}  // namespace pmrnet
