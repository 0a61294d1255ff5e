#pragma once

#include <cstdint>
#include <vector>

#include "classmark/errors.hpp"

namespace classmark {

/// 8-bit raster image, row-major with channel-minor layout:
/// pixels[(row * width + col) * channels + ch].
/// channels is 1 (grayscale) or 3 (RGB).
struct RasterImage {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  RasterImage() = default;
  RasterImage(int h, int w, int c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t size() const { return pixels.size(); }

  std::uint8_t& at(int row, int col, int ch = 0) {
    return pixels[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  std::uint8_t at(int row, int col, int ch = 0) const {
    return pixels[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }

  bool same_shape(const RasterImage& other) const {
    return height == other.height && width == other.width &&
           channels == other.channels;
  }

  bool operator==(const RasterImage& other) const {
    return same_shape(other) && pixels == other.pixels;
  }
};

inline void require_valid_shape(const RasterImage& img) {
  if (img.height <= 0 || img.width <= 0 ||
      (img.channels != 1 && img.channels != 3))
    raise(Errc::UnsupportedShape, "image shape must be (h>0, w>0, c in {1,3})");
  if (img.pixels.size() !=
      static_cast<std::size_t>(img.height) * img.width * img.channels)
    raise(Errc::UnsupportedShape, "pixel buffer does not match declared shape");
}

}  // namespace classmark
