#include "classmark/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>

namespace classmark {

namespace {

bool looks_like_jpeg(const std::uint8_t* data, std::size_t size) {
  return size >= 3 && data[0] == 0xff && data[1] == 0xd8 && data[2] == 0xff;
}

struct MemReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

void mem_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
  if (r->pos + n > r->size) png_error(png, "unexpected end of PNG stream");
  std::memcpy(out, r->data + r->pos, n);
  r->pos += n;
}

void mem_write_fn(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void mem_flush_fn(png_structp) {}

}  // namespace

RasterImage decode_png(const std::uint8_t* data, std::size_t size) {
  if (looks_like_jpeg(data, size))
    raise(Errc::UnsupportedImageFormat,
          "JPEG input rejected: lossy compression destroys LSB planes");
  if (size < 8 || png_sig_cmp(data, 0, 8) != 0)
    raise(Errc::UnsupportedImageFormat, "not a PNG stream");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(Errc::IoError, "libpng allocation failed");
  }

  MemReader reader{data, size, 0};
  RasterImage img;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(Errc::UnsupportedImageFormat, "PNG decode failed");
  }

  png_set_read_fn(png, &reader, mem_read_fn);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  if (depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(Errc::UnsupportedImageFormat, "16-bit PNG not supported");
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  // Alpha carries no payload; drop it and keep the color samples bit-exact.
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(Errc::UnsupportedImageFormat,
          "expected 1 or 3 channels, got " + std::to_string(channels));
  }

  img = RasterImage(int(h), int(w), channels);
  rows.resize(h);
  for (png_uint_32 r = 0; r < h; ++r)
    rows[r] = img.pixels.data() + std::size_t(r) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

RasterImage read_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  return decode_png(buf.data(), buf.size());
}

std::vector<std::uint8_t> encode_png(const RasterImage& image) {
  require_valid_shape(image);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    raise(Errc::IoError, "libpng allocation failed");
  }

  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(image.height);

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(Errc::IoError, "PNG encode failed");
  }

  png_set_write_fn(png, &out, mem_write_fn, mem_flush_fn);
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < image.height; ++r)
    rows[r] = const_cast<png_bytep>(image.pixels.data() +
                                    std::size_t(r) * image.width * image.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::string& path, const RasterImage& image) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::IoError, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) raise(Errc::IoError, "short write to " + path);
}

}  // namespace classmark
