#pragma once

#include "vis2ir/tensor.hpp"

namespace vis2ir {

/// Closed interval of admissible pixel values.
struct ValueRange {
  double lo = -1.0;
  double hi = 1.0;

  double span() const noexcept { return hi - lo; }
  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
  friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

inline constexpr ValueRange kSignedUnit{-1.0, 1.0};
inline constexpr ValueRange kUnit{0.0, 1.0};

/// Dense C x H x W raster, stored as a batch-of-one tensor, tagged with its value range.
struct ImageBuf {
  Tensor pixels;
  ValueRange range = kSignedUnit;

  ImageBuf() = default;
  ImageBuf(Tensor t, ValueRange r);
  ImageBuf(int channels, int height, int width, ValueRange r, double fill = 0.0);

  int channels() const { return pixels.shape().c; }
  int height() const { return pixels.shape().h; }
  int width() const { return pixels.shape().w; }
  bool same_extent(const ImageBuf& o) const { return height() == o.height() && width() == o.width(); }

  double& at(int c, int y, int x) { return pixels.at(0, c, y, x); }
  double at(int c, int y, int x) const { return pixels.at(0, c, y, x); }

  friend bool operator==(const ImageBuf&, const ImageBuf&) = default;
};

/// Affine remap of every value from `img.range` onto `target`.
ImageBuf remap(const ImageBuf& img, ValueRange target);

/// BT.601 luma of a 3-channel image (single-channel input is returned as is).
ImageBuf luminance(const ImageBuf& img);

/// Converts between 1 and 3 channels (luma or replication); other counts must already match.
ImageBuf to_channels(const ImageBuf& img, int channels);

}  // namespace vis2ir
