#include "vis2ir/image.hpp"

#include "vis2ir/error.hpp"

namespace vis2ir {

ImageBuf::ImageBuf(Tensor t, ValueRange r) : pixels(std::move(t)), range(r) {
  if (pixels.shape().n != 1) throw PreconditionError("ImageBuf holds exactly one sample, got " + to_string(pixels.shape()));
}

ImageBuf::ImageBuf(int channels, int height, int width, ValueRange r, double fill)
    : pixels({1, channels, height, width}, fill), range(r) {}

ImageBuf remap(const ImageBuf& img, ValueRange target) {
  if (img.range == target) return img;
  ImageBuf out(img.pixels, target);
  const double k = target.span() / img.range.span();
  for (auto& v : out.pixels.values()) v = target.lo + (v - img.range.lo) * k;
  return out;
}

ImageBuf luminance(const ImageBuf& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) {
    throw PreconditionError("luminance: expected 1 or 3 channels, got " + std::to_string(img.channels()));
  }
  ImageBuf out(1, img.height(), img.width(), img.range);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.at(0, y, x) = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
  return out;
}

ImageBuf to_channels(const ImageBuf& img, int channels) {
  if (img.channels() == channels) return img;
  if (channels == 1) return luminance(img);
  if (img.channels() == 1 && channels == 3) {
    ImageBuf out(3, img.height(), img.width(), img.range);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) out.at(c, y, x) = img.at(0, y, x);
    return out;
  }
  throw PreconditionError("cannot convert " + std::to_string(img.channels()) + " channels to " +
                          std::to_string(channels));
}

}  // namespace vis2ir
