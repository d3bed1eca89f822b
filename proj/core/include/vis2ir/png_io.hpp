#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace vis2ir::io {

/// 8-bit raster with interleaved channels (HWC), 1 (gray) or 3 (RGB) channels.
struct RawImage {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const RawImage&, const RawImage&) = default;
};

/// Decodes any PNG to 8-bit gray or RGB; alpha is discarded. Throws IoError.
RawImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RawImage& img);

}  // namespace vis2ir::io
