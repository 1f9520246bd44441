#include "pmrnet/image_io.hpp"

#include <png.h>

#include <cstring>

#include "pmrnet/errors.hpp"

namespace pmrnet {

namespace {

struct PngReader {
  png_image image;

  explicit PngReader(const std::filesystem::path& path) {
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
      const std::string msg = image.message;
      png_image_free(&image);
      throw DecodeError("cannot decode " + path.string() + ": " + msg);
    }
  }
  ~PngReader() { png_image_free(&image); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  int channels() const { return (image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1; }
};

}  // namespace

PngHeader read_png_header(const std::filesystem::path& path) {
  PngReader r(path);
  return {r.image.height, r.image.width, r.channels()};
}

Image8 read_png(const std::filesystem::path& path) {
  PngReader r(path);
  Image8 out;
  out.height = r.image.height;
  out.width = r.image.width;
  out.channels = r.channels();
  r.image.format = out.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  out.pixels.resize(PNG_IMAGE_SIZE(r.image));
  if (!png_image_finish_read(&r.image, nullptr, out.pixels.data(), 0, nullptr)) {
    throw DecodeError("cannot decode " + path.string() + ": " + r.image.message);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw Error("write_png: unsupported channel count " + std::to_string(img.channels));
  }
  if (img.pixels.size() != img.height * img.width * img.channels) {
    throw ShapeError("write_png: pixel buffer does not match extent");
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0,
                               nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error("cannot write " + path.string() + ": " + msg);
  }
}

}  // namespace pmrnet
