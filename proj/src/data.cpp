#include "pmrnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "pmrnet/errors.hpp"
#include "pmrnet/image_io.hpp"
#include "pmrnet/kernels.hpp"

namespace pmrnet {

namespace fs = std::filesystem;

SampleBatch make_batch(std::span<const Sample> samples) {
  std::vector<Tensor<float>> images;
  std::vector<Tensor<std::uint8_t>> masks;
  SampleBatch b;
  for (const auto& s : samples) {
    images.push_back(s.image);
    masks.push_back(s.mask);
    b.ids.push_back(s.id);
  }
  b.images = stack_batch<float>(images);
  b.masks = stack_batch<std::uint8_t>(masks);
  return b;
}

Dataset Dataset::in_memory(std::vector<Sample> samples) {
  Dataset ds;
  auto memory = std::make_shared<std::map<std::string, Sample>>();
  for (auto& s : samples) {
    ds.ids_.push_back(s.id);
    if (!memory->emplace(s.id, std::move(s)).second) {
      throw Error("duplicate sample id " + ds.ids_.back());
    }
  }
  ds.memory_ = std::move(memory);
  return ds;
}

Dataset Dataset::on_disk(fs::path root, std::vector<std::string> ids) {
  Dataset ds;
  ds.root_ = std::move(root);
  ds.ids_ = std::move(ids);
  return ds;
}

Sample Dataset::get(std::size_t index) const {
  if (index >= ids_.size()) throw Error("sample index out of range");
  return get(ids_[index]);
}

Sample Dataset::get(const std::string& id) const {
  if (memory_) {
    auto it = memory_->find(id);
    if (it == memory_->end()) throw Error("unknown sample id " + id);
    return it->second;
  }
  return read_sample(root_, id);
}

Dataset Dataset::subset(std::span<const std::string> ids) const {
  const std::set<std::string> known(ids_.begin(), ids_.end());
  for (const auto& id : ids) {
    if (!known.contains(id)) throw Error("unknown sample id " + id);
  }
  Dataset ds = *this;
  ds.ids_.assign(ids.begin(), ids.end());
  return ds;
}

Dataset load_dataset(const fs::path& root) {
  const fs::path images = root / "images";
  const fs::path masks = root / "masks";
  if (!fs::is_directory(images)) {
    throw Error("dataset root " + root.string() + " has no images/ directory");
  }
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) {
    const fs::path mask = masks / (id + ".png");
    if (!fs::exists(mask)) {
      throw MissingMaskError("image " + (images / (id + ".png")).string() +
                             " has no mask " + mask.string());
    }
    const PngHeader a = read_png_header(images / (id + ".png"));
    const PngHeader b = read_png_header(mask);
    if (a.height != b.height || a.width != b.width) {
      throw ShapeError("image and mask extents differ for " + id);
    }
  }
  return Dataset::on_disk(root, std::move(ids));
}

Sample read_sample(const fs::path& root, const std::string& id) {
  const Image8 img = read_png(root / "images" / (id + ".png"));
  const Image8 msk = read_png(root / "masks" / (id + ".png"));
  if (img.height != msk.height || img.width != msk.width) {
    throw ShapeError("image and mask extents differ for " + id);
  }
  const std::size_t h = img.height, w = img.width, c = img.channels;
  Sample s{id, Tensor<float>(Shape{1, c, h, w}),
           Tensor<std::uint8_t>(Shape{1, 1, h, w})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < h * w; ++p) {
      s.image.plane(0, ch)[p] = img.pixels[p * c + ch] / 255.0f;
    }
  }
  const std::size_t mc = msk.channels;
  for (std::size_t p = 0; p < h * w; ++p) {
    // Colour annotations are binarized on their first channel.
    s.mask[p] = msk.pixels[p * mc] / 255.0 >= 0.5 ? 1 : 0;
  }
  return s;
}

void write_dataset(const Dataset& ds, const fs::path& root) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  for (const auto& id : ds.ids()) {
    const Sample s = ds.get(id);
    const Shape sh = s.image.shape();
    Image8 img{sh.h, sh.w, static_cast<int>(sh.c),
               std::vector<std::uint8_t>(sh.size())};
    for (std::size_t ch = 0; ch < sh.c; ++ch) {
      for (std::size_t p = 0; p < sh.plane(); ++p) {
        const float v = std::clamp(s.image.plane(0, ch)[p], 0.0f, 1.0f);
        img.pixels[p * sh.c + ch] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
    Image8 msk{sh.h, sh.w, 1, std::vector<std::uint8_t>(sh.plane())};
    for (std::size_t p = 0; p < sh.plane(); ++p) msk.pixels[p] = s.mask[p] ? 255 : 0;
    write_png(root / "images" / (id + ".png"), img);
    write_png(root / "masks" / (id + ".png"), msk);
  }
}

SplitSpec split_ids(std::span<const std::string> ids, double ratio,
                    std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw RangeError("split ratio must lie in (0, 1), got " + std::to_string(ratio));
  }
  std::vector<std::string> order(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto cut = static_cast<std::size_t>(std::lround(ratio * order.size()));
  SplitSpec s;
  s.seed = seed;
  s.ratio = ratio;
  s.train_ids.assign(order.begin(), order.begin() + cut);
  s.test_ids.assign(order.begin() + cut, order.end());
  return s;
}

SplitSpec split(const Dataset& ds, double ratio, std::uint64_t seed) {
  return split_ids(ds.ids(), ratio, seed);
}

void write_split_file(std::span<const std::string> ids, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  for (const auto& id : ids) f << id << '\n';
}

std::vector<std::string> read_split_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

namespace {

// out(y, x) = in(map(y, x)) for every plane of image and mask.
template <typename Map>
Sample remap(const Sample& s, std::size_t out_h, std::size_t out_w, Map map) {
  const Shape is = s.image.shape();
  Sample out{s.id, Tensor<float>(Shape{is.n, is.c, out_h, out_w}),
             Tensor<std::uint8_t>(Shape{1, 1, out_h, out_w})};
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      long sy = 0, sx = 0;
      if (!map(y, x, sy, sx)) continue;
      for (std::size_t c = 0; c < is.c; ++c) {
        out.image.at(0, c, y, x) = s.image.at(0, c, sy, sx);
      }
      out.mask.at(0, 0, y, x) = s.mask.at(0, 0, sy, sx);
    }
  }
  return out;
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  const float d = mx - mn;
  v = mx;
  s = mx > 0.0f ? d / mx : 0.0f;
  if (d <= 0.0f) {
    h = 0.0f;
  } else if (mx == r) {
    h = std::fmod((g - b) / d / 6.0f + 1.0f, 1.0f);
  } else if (mx == g) {
    h = ((b - r) / d + 2.0f) / 6.0f;
  } else {
    h = ((r - g) / d + 4.0f) / 6.0f;
  }
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  const float h6 = h * 6.0f;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const float f = h6 - std::floor(h6);
  const float p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace

Sample hflip(const Sample& s) {
  const Extent e = s.image.shape().extent();
  return remap(s, e.height, e.width, [&](std::size_t y, std::size_t x, long& sy, long& sx) {
    sy = y;
    sx = e.width - 1 - x;
    return true;
  });
}

Sample vflip(const Sample& s) {
  const Extent e = s.image.shape().extent();
  return remap(s, e.height, e.width, [&](std::size_t y, std::size_t x, long& sy, long& sx) {
    sy = e.height - 1 - y;
    sx = x;
    return true;
  });
}

Sample transpose(const Sample& s) {
  const Extent e = s.image.shape().extent();
  return remap(s, e.width, e.height, [](std::size_t y, std::size_t x, long& sy, long& sx) {
    sy = x;
    sx = y;
    return true;
  });
}

Sample shift_sample(const Sample& s, int dy, int dx) {
  const Extent e = s.image.shape().extent();
  return remap(s, e.height, e.width, [&](std::size_t y, std::size_t x, long& sy, long& sx) {
    sy = static_cast<long>(y) - dy;
    sx = static_cast<long>(x) - dx;
    return sy >= 0 && sx >= 0 && sy < static_cast<long>(e.height) &&
           sx < static_cast<long>(e.width);
  });
}

Sample hsv_jitter(const Sample& s, double hue_shift, double sat_scale,
                  double val_scale) {
  Sample out = s;
  if (s.image.shape().c != 3) return out;
  const std::size_t n = s.image.shape().plane();
  float* r = out.image.plane(0, 0);
  float* g = out.image.plane(0, 1);
  float* b = out.image.plane(0, 2);
  for (std::size_t p = 0; p < n; ++p) {
    float h, sat, val;
    rgb_to_hsv(r[p], g[p], b[p], h, sat, val);
    h = static_cast<float>(h + hue_shift);
    h -= std::floor(h);
    sat = std::clamp(static_cast<float>(sat * sat_scale), 0.0f, 1.0f);
    val = std::clamp(static_cast<float>(val * val_scale), 0.0f, 1.0f);
    hsv_to_rgb(h, sat, val, r[p], g[p], b[p]);
  }
  return out;
}

AugmentParams draw_augment_params(Extent extent, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> hue(-0.05, 0.05);
  std::uniform_real_distribution<double> scale(0.8, 1.2);
  const int max_dy = static_cast<int>(extent.height / 10);
  const int max_dx = static_cast<int>(extent.width / 10);
  AugmentParams p;
  p.hue_shift = hue(rng);
  p.sat_scale = scale(rng);
  p.val_scale = scale(rng);
  p.dy = std::uniform_int_distribution<int>(-max_dy, max_dy)(rng);
  p.dx = std::uniform_int_distribution<int>(-max_dx, max_dx)(rng);
  return p;
}

std::vector<Sample> augment_x8(const Sample& s, const AugmentParams& p) {
  std::vector<Sample> out;
  out.reserve(8);
  out.push_back(s);
  out.push_back(hflip(s));
  out.push_back(vflip(s));
  out.push_back(transpose(s));
  out.push_back(vflip(hflip(s)));
  out.push_back(hsv_jitter(s, p.hue_shift, p.sat_scale, p.val_scale));
  out.push_back(shift_sample(s, p.dy, p.dx));
  out.push_back(hsv_jitter(out.back(), p.hue_shift, p.sat_scale, p.val_scale));
  for (std::size_t k = 1; k < out.size(); ++k) out[k].id = s.id + "~a" + std::to_string(k);
  return out;
}

namespace {

std::uint64_t mix_id(std::uint64_t seed, const std::string& id) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<Sample> augment_x8(const Sample& s, std::uint64_t seed) {
  std::mt19937_64 rng(mix_id(seed, s.id));
  return augment_x8(s, draw_augment_params(s.image.shape().extent(), rng));
}

Dataset augment_dataset(const Dataset& ds, std::uint64_t seed) {
  std::vector<Sample> all;
  all.reserve(ds.size() * 8);
  for (const auto& id : ds.ids()) {
    for (auto& v : augment_x8(ds.get(id), seed)) all.push_back(std::move(v));
  }
  return Dataset::in_memory(std::move(all));
}

Sample resize_sample(const Sample& s, Extent target) {
  const Shape is = s.image.shape();
  if (is.extent() == target) return s;
  Sample out{s.id, Tensor<float>(Shape{is.n, is.c, target.height, target.width}),
             Tensor<std::uint8_t>(Shape{1, 1, target.height, target.width})};
  kernels::bilinear_forward(s.image, out.image);
  for (std::size_t y = 0; y < target.height; ++y) {
    const std::size_t sy = std::min(is.h - 1, (2 * y + 1) * is.h / (2 * target.height));
    for (std::size_t x = 0; x < target.width; ++x) {
      const std::size_t sx = std::min(is.w - 1, (2 * x + 1) * is.w / (2 * target.width));
      out.mask.at(0, 0, y, x) = s.mask.at(0, 0, sy, sx);
    }
  }
  return out;
}

Sample match_channels(const Sample& s, int channels) {
  const Shape is = s.image.shape();
  if (static_cast<int>(is.c) == channels) return s;
  Sample out{s.id, Tensor<float>(Shape{1, static_cast<std::size_t>(channels), is.h, is.w}),
             s.mask};
  if (is.c == 1 && channels == 3) {
    for (std::size_t c = 0; c < 3; ++c) {
      std::copy(s.image.plane(0, 0), s.image.plane(0, 0) + is.plane(), out.image.plane(0, c));
    }
  } else if (is.c == 3 && channels == 1) {
    for (std::size_t p = 0; p < is.plane(); ++p) {
      out.image[p] = 0.299f * s.image.plane(0, 0)[p] + 0.587f * s.image.plane(0, 1)[p] +
                     0.114f * s.image.plane(0, 2)[p];
    }
  } else {
    throw ShapeError("cannot convert " + std::to_string(is.c) + " channels to " +
                     std::to_string(channels));
  }
  return out;
}

bool synth_inside(const SynthShape& shape, std::size_t y, std::size_t x) {
  const double dy = (y + 0.5 - shape.cy) / shape.ry;
  const double dx = (x + 0.5 - shape.cx) / shape.rx;
  if (shape.kind == SynthShape::Kind::ellipse) return dy * dy + dx * dx <= 1.0;
  return std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
}

SynthDataset synth_dataset(std::size_t n, std::size_t hw, std::uint64_t seed,
                           std::size_t divisor) {
  if (divisor == 0 || hw % divisor != 0) {
    throw DivisibilityError("synthetic extent " + std::to_string(hw) +
                            " not divisible by " + std::to_string(divisor));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.04);
  SynthDataset out;
  std::vector<Sample> samples;
  const int width = static_cast<int>(std::to_string(n > 0 ? n - 1 : 0).size());
  for (std::size_t k = 0; k < n; ++k) {
    std::string id = std::to_string(k);
    id = "synth_" + std::string(std::max(0, width - static_cast<int>(id.size())), '0') + id;
    const int count = unit(rng) < 0.5 ? 1 : 2;
    std::vector<SynthShape> shapes;
    for (int s = 0; s < count; ++s) {
      SynthShape sh;
      sh.kind = unit(rng) < 0.5 ? SynthShape::Kind::ellipse : SynthShape::Kind::rectangle;
      sh.ry = hw * (0.12 + 0.14 * unit(rng));
      sh.rx = hw * (0.12 + 0.14 * unit(rng));
      sh.cy = sh.ry + (hw - 2 * sh.ry) * unit(rng);
      sh.cx = sh.rx + (hw - 2 * sh.rx) * unit(rng);
      shapes.push_back(sh);
    }
    double bg[3], fg[3];
    for (int c = 0; c < 3; ++c) {
      bg[c] = 0.1 + 0.25 * unit(rng);
      fg[c] = 0.65 + 0.3 * unit(rng);
    }
    Sample smp{id, Tensor<float>(Shape{1, 3, hw, hw}), Tensor<std::uint8_t>(Shape{1, 1, hw, hw})};
    for (std::size_t y = 0; y < hw; ++y) {
      for (std::size_t x = 0; x < hw; ++x) {
        bool inside = false;
        for (const auto& sh : shapes) inside = inside || synth_inside(sh, y, x);
        smp.mask.at(0, 0, y, x) = inside ? 1 : 0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = std::clamp((inside ? fg[c] : bg[c]) + noise(rng), 0.0, 1.0);
          // Quantized to 8 bits so a PNG round trip is lossless.
          smp.image.at(0, c, y, x) = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
        }
      }
    }
    out.shapes[id] = std::move(shapes);
    samples.push_back(std::move(smp));
  }
  out.data = Dataset::in_memory(std::move(samples));
  return out;
}

}  // namespace pmrnet
