#include "vis2ir/png_io.hpp"

#include <png.h>

#include <cstring>

#include "vis2ir/error.hpp"

namespace vis2ir::io {

RawImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGBA : PNG_FORMAT_GA;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  RawImage out;
  out.channels = color ? 3 : 1;
  out.height = static_cast<int>(image.height);
  out.width = static_cast<int>(image.width);
  const int stride_in = out.channels + 1;
  const std::size_t count = static_cast<std::size_t>(out.height) * out.width;
  out.pixels.resize(count * out.channels);
  for (std::size_t i = 0; i < count; ++i)
    for (int c = 0; c < out.channels; ++c) out.pixels[i * out.channels + c] = buffer[i * stride_in + c];
  return out;
}

void write_png(const std::filesystem::path& path, const RawImage& img) {
  if (img.channels != 1 && img.channels != 3) throw PreconditionError("write_png: need 1 or 3 channels");
  if (img.pixels.size() != static_cast<std::size_t>(img.height) * img.width * img.channels) {
    throw PreconditionError("write_png: pixel buffer size mismatch");
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

}  // namespace vis2ir::io
