#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pmrnet/tensor.hpp"

namespace pmrnet {

// One image/mask pair. image is (1, C, H, W) in [0, 1]; mask is (1, 1, H, W)
// with values in {0, 1}.
struct Sample {
  std::string id;
  Tensor<float> image;
  Tensor<std::uint8_t> mask;
};

struct SampleBatch {
  Tensor<float> images;          // (N, C, H, W)
  Tensor<std::uint8_t> masks;    // (N, 1, H, W)
  std::vector<std::string> ids;
};

// Throws ShapeError when extents or channel counts differ.
SampleBatch make_batch(std::span<const Sample> samples);

// Read-only collection of samples, either indexed on disk (decoded on each
// access) or held in memory.
class Dataset {
 public:
  Dataset() = default;
  static Dataset in_memory(std::vector<Sample> samples);
  static Dataset on_disk(std::filesystem::path root, std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::string>& ids() const { return ids_; }
  bool lazy() const { return memory_ == nullptr; }
  const std::filesystem::path& root() const { return root_; }

  Sample get(std::size_t index) const;
  Sample get(const std::string& id) const;

  // Samples named by ids, in that order. Unknown ids raise Error.
  Dataset subset(std::span<const std::string> ids) const;

 private:
  std::filesystem::path root_;
  std::vector<std::string> ids_;
  std::shared_ptr<const std::map<std::string, Sample>> memory_;
};

// <root>/images/<id>.png paired with <root>/masks/<id>.png, ids sorted.
// MissingMaskError for an image without a mask, DecodeError for unreadable
// files. Pixel data is decoded lazily.
Dataset load_dataset(const std::filesystem::path& root);

// Decode one pair: image scaled by 1/255, mask binarized at 0.5.
Sample read_sample(const std::filesystem::path& root, const std::string& id);

// images/<id>.png and masks/<id>.png (mask written as 0/255).
void write_dataset(const Dataset& ds, const std::filesystem::path& root);

struct SplitSpec {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
  double ratio = 0.8;
};

// Shuffle with the seed, then the first round(ratio * n) ids train.
// Throws RangeError unless 0 < ratio < 1.
SplitSpec split_ids(std::span<const std::string> ids, double ratio,
                    std::uint64_t seed);
SplitSpec split(const Dataset& ds, double ratio, std::uint64_t seed);

// Plain text, one id per line.
void write_split_file(std::span<const std::string> ids,
                      const std::filesystem::path& path);
std::vector<std::string> read_split_file(const std::filesystem::path& path);

// Geometric and photometric transforms. Geometry is applied identically to
// image and mask; colour changes never touch the mask.
Sample hflip(const Sample& s);
Sample vflip(const Sample& s);
Sample transpose(const Sample& s);
// Move content down by dy rows and right by dx columns; vacated pixels are 0.
Sample shift_sample(const Sample& s, int dy, int dx);
// Additive hue shift (in turns), multiplicative saturation and value factors.
// Identity on grayscale images.
Sample hsv_jitter(const Sample& s, double hue_shift, double sat_scale,
                  double val_scale);

struct AugmentParams {
  double hue_shift = 0.0;
  double sat_scale = 1.0;
  double val_scale = 1.0;
  int dy = 0;
  int dx = 0;
};

// hue in [-0.05, 0.05], saturation and value factors in [0.8, 1.2], shift up
// to 10% of each extent.
AugmentParams draw_augment_params(Extent extent, std::mt19937_64& rng);

// [original, hflip, vflip, transpose, hflip+vflip, hsv, shift, hsv+shift].
// Ids get the suffix "~a<k>" for k >= 1.
std::vector<Sample> augment_x8(const Sample& s, const AugmentParams& p);
std::vector<Sample> augment_x8(const Sample& s, std::uint64_t seed);

// Every sample of ds followed by its seven variants, seeded per sample.
Dataset augment_dataset(const Dataset& ds, std::uint64_t seed);

// Bilinear image resize, nearest-neighbour mask resize.
Sample resize_sample(const Sample& s, Extent target);

// Gray <-> RGB conversion to the requested channel count.
Sample match_channels(const Sample& s, int channels);

struct SynthShape {
  enum class Kind { ellipse, rectangle } kind = Kind::ellipse;
  double cy = 0, cx = 0;  // centre, pixel units
  double ry = 0, rx = 0;  // half extents
};

// Whether the pixel centre (y + 0.5, x + 0.5) lies inside the shape.
bool synth_inside(const SynthShape& shape, std::size_t y, std::size_t x);

struct SynthDataset {
  Dataset data;
  std::map<std::string, std::vector<SynthShape>> shapes;
};

// n RGB images of one or two ellipses/rectangles on a noisy background, with
// exact masks. DivisibilityError when hw is not a multiple of divisor.
SynthDataset synth_dataset(std::size_t n, std::size_t hw, std::uint64_t seed,
                           std::size_t divisor = 1);

}  // namespace pmrnet
