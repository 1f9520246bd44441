#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pmrnet {

// 8-bit raster, interleaved channels (1 = gray, 3 = RGB).
struct Image8 {
  std::size_t height = 0;
  std::size_t width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

struct PngHeader {
  std::size_t height = 0;
  std::size_t width = 0;
  int channels = 0;
};

// Header only; DecodeError when the file is not a readable PNG.
PngHeader read_png_header(const std::filesystem::path& path);

// Colour files decode to RGB, the rest to gray; alpha is dropped.
// DecodeError on failure.
Image8 read_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image8& image);

}  // namespace pmrnet
