#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pmrnet/data.hpp"
#include "pmrnet/image_io.hpp"

// Static raster plots written as PNG.
namespace pmrnet {

using Rgb = std::array<std::uint8_t, 3>;

struct Series {
  std::vector<double> values;
  Rgb color{0, 0, 0};
};

// Polylines over a shared y range on a white canvas with axes. Non-finite
// points are skipped.
Image8 plot_lines(const std::vector<Series>& series, std::size_t width = 640,
                  std::size_t height = 400);

// One bar per value, heights on [0, 1].
Image8 plot_bars(const std::vector<double>& values, const std::vector<Rgb>& colors,
                 std::size_t width = 480, std::size_t height = 320);

// Input | ground truth | prediction, side by side.
Image8 overlay_panel(const Sample& sample, const Tensor<std::uint8_t>& pred);

// total (black), bce (blue), dice (red).
void write_loss_plot(const std::vector<double>& total, const std::vector<double>& bce,
                     const std::vector<double>& dice, const std::filesystem::path& path);

}  // namespace pmrnet
