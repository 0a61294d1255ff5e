#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "classmark/image.hpp"

namespace classmark {

/// Loads an 8-bit grayscale or RGB PNG. JPEG input is rejected with
/// UnsupportedImageFormat: lossy compression destroys the embedded bit
/// planes, so it must never enter the pipeline silently.
RasterImage read_png(const std::string& path);

/// Decodes a PNG byte buffer (same constraints as read_png).
RasterImage decode_png(const std::uint8_t* data, std::size_t size);

void write_png(const std::string& path, const RasterImage& image);

std::vector<std::uint8_t> encode_png(const RasterImage& image);

}  // namespace classmark
