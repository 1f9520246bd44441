#include "pmrnet/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pmrnet {

namespace {

constexpr std::size_t kMargin = 24;

class Canvas {
 public:
  Canvas(std::size_t w, std::size_t h) : img_{h, w, 3, std::vector<std::uint8_t>(w * h * 3, 255)} {}

  void set(long x, long y, Rgb c) {
    if (x < 0 || y < 0 || x >= static_cast<long>(img_.width) ||
        y >= static_cast<long>(img_.height)) {
      return;
    }
    std::uint8_t* p = &img_.pixels[(y * img_.width + x) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  void line(long x0, long y0, long x1, long y1, Rgb c) {
    const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    while (true) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const long e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }

  void rect(long x0, long y0, long x1, long y1, Rgb c) {
    for (long y = y0; y <= y1; ++y)
      for (long x = x0; x <= x1; ++x) set(x, y, c);
  }

  void axes() {
    const long w = img_.width, h = img_.height, m = kMargin;
    const Rgb grey{160, 160, 160};
    line(m, h - m, w - m, h - m, grey);
    line(m, m, m, h - m, grey);
  }

  Image8 take() { return std::move(img_); }

 private:
  Image8 img_;
};

}  // namespace

Image8 plot_lines(const std::vector<Series>& series, std::size_t width,
                  std::size_t height) {
  Canvas cv(width, height);
  cv.axes();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t longest = 0;
  for (const auto& s : series) {
    longest = std::max(longest, s.values.size());
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (longest == 0 || !std::isfinite(lo)) return cv.take();
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pw = static_cast<double>(width - 2 * kMargin);
  const double ph = static_cast<double>(height - 2 * kMargin);
  auto px = [&](std::size_t i) {
    return static_cast<long>(kMargin + (longest > 1 ? pw * i / (longest - 1) : pw / 2));
  };
  auto py = [&](double v) {
    return static_cast<long>(height - kMargin - ph * (v - lo) / (hi - lo));
  };
  for (const auto& s : series) {
    bool have = false;
    long lx = 0, ly = 0;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (!std::isfinite(s.values[i])) {
        have = false;
        continue;
      }
      const long x = px(i), y = py(s.values[i]);
      if (have) cv.line(lx, ly, x, y, s.color);
      else cv.rect(x - 1, y - 1, x + 1, y + 1, s.color);
      lx = x;
      ly = y;
      have = true;
    }
  }
  return cv.take();
}

Image8 plot_bars(const std::vector<double>& values, const std::vector<Rgb>& colors,
                 std::size_t width, std::size_t height) {
  Canvas cv(width, height);
  cv.axes();
  if (values.empty()) return cv.take();
  const double slot = static_cast<double>(width - 2 * kMargin) / values.size();
  const double ph = static_cast<double>(height - 2 * kMargin);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::isfinite(values[i]) ? std::clamp(values[i], 0.0, 1.0) : 0.0;
    const long x0 = static_cast<long>(kMargin + slot * i + slot * 0.15);
    const long x1 = static_cast<long>(kMargin + slot * (i + 1) - slot * 0.15);
    const long y0 = static_cast<long>(height - kMargin - ph * v);
    const Rgb c = colors.empty() ? Rgb{70, 110, 180} : colors[i % colors.size()];
    cv.rect(x0, y0, x1, static_cast<long>(height - kMargin) - 1, c);
  }
  return cv.take();
}

Image8 overlay_panel(const Sample& sample, const Tensor<std::uint8_t>& pred) {
  const Shape s = sample.image.shape();
  const std::size_t h = s.h, w = s.w, gap = 4;
  Image8 out{h, 3 * w + 2 * gap, 3, std::vector<std::uint8_t>(h * (3 * w + 2 * gap) * 3, 255)};
  auto put = [&](std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    std::uint8_t* p = &out.pixels[(y * out.width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::uint8_t rgb[3];
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = sample.image.at(0, s.c == 3 ? c : 0, y, x);
        rgb[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
      }
      put(x, y, rgb[0], rgb[1], rgb[2]);
      const std::uint8_t g = sample.mask.at(0, 0, y, x) ? 255 : 0;
      put(w + gap + x, y, g, g, g);
      const std::uint8_t p = pred.at(0, 0, y, x) ? 255 : 0;
      put(2 * (w + gap) + x, y, p, p, p);
    }
  }
  return out;
}

void write_loss_plot(const std::vector<double>& total, const std::vector<double>& bce,
                     const std::vector<double>& dice, const std::filesystem::path& path) {
  write_png(path, plot_lines({{total, {0, 0, 0}}, {bce, {40, 90, 200}}, {dice, {200, 50, 40}}}));
}

}  // namespace pmrnet
