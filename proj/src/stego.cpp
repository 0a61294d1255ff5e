#include "classmark/stego.hpp"

#include "classmark/util.hpp"

namespace classmark::stego {

namespace {

constexpr int kHeaderBits = 32;
constexpr int kMaxPlanes = 2;

// Bit position i lives at pixel (i % npixels) in plane (i / npixels).
struct BitCursor {
  std::size_t npixels;
  std::size_t plane_of(std::size_t i) const { return i / npixels; }
  std::size_t pixel_of(std::size_t i) const { return i % npixels; }
};

}  // namespace

BitSeq encode_payload(std::string_view identity) {
  if (identity.empty()) raise(Errc::EmptyPayload, "identity must be non-empty");
  if (!is_printable_ascii(identity))
    raise(Errc::NonAsciiPayload,
          "identity must be printable 7-bit text: \"" + std::string(identity) + "\"");
  if (identity.size() >= (1ull << 29))
    raise(Errc::NonAsciiPayload, "identity too long for 32-bit framing");

  BitSeq bits;
  bits.reserve(kHeaderBits + identity.size() * 8);
  std::uint32_t len = static_cast<std::uint32_t>(identity.size());
  for (int i = kHeaderBits - 1; i >= 0; --i)
    bits.push_back(static_cast<std::uint8_t>((len >> i) & 1u));
  for (unsigned char c : identity)
    for (int i = 7; i >= 0; --i)
      bits.push_back(static_cast<std::uint8_t>((c >> i) & 1u));
  return bits;
}

long long capacity(int height, int width, int channels, int planes) {
  return static_cast<long long>(planes) * height * width * channels;
}

RasterImage lsb_embed(const RasterImage& image, const BitSeq& payload) {
  require_valid_shape(image);
  const long long cap = capacity(image, kMaxPlanes);
  if (static_cast<long long>(payload.size()) > cap)
    raise(Errc::CapacityExceeded,
          "payload of " + std::to_string(payload.size()) + " bits exceeds " +
              std::to_string(cap) + "-bit capacity");

  RasterImage out = image;
  BitCursor cursor{out.pixels.size()};
  for (std::size_t i = 0; i < payload.size(); ++i) {
    const std::uint8_t mask = static_cast<std::uint8_t>(1u << cursor.plane_of(i));
    std::uint8_t& px = out.pixels[cursor.pixel_of(i)];
    px = static_cast<std::uint8_t>(payload[i] ? (px | mask) : (px & ~mask));
  }
  return out;
}

std::string lsb_extract(const RasterImage& image) {
  require_valid_shape(image);
  BitCursor cursor{image.pixels.size()};
  const long long cap = capacity(image, kMaxPlanes);
  if (cap < kHeaderBits)
    raise(Errc::MalformedHeader, "image too small to hold a length header");

  auto bit_at = [&](std::size_t i) -> std::uint32_t {
    const std::uint8_t mask = static_cast<std::uint8_t>(1u << cursor.plane_of(i));
    return (image.pixels[cursor.pixel_of(i)] & mask) ? 1u : 0u;
  };

  std::uint32_t len = 0;
  for (int i = 0; i < kHeaderBits; ++i) len = (len << 1) | bit_at(i);

  if (len == 0) raise(Errc::MalformedHeader, "header declares empty payload");
  const long long need = kHeaderBits + 8ll * len;
  if (need > cap)
    raise(Errc::MalformedHeader, "header declares " + std::to_string(len) +
                                     " bytes, capacity is " +
                                     std::to_string(cap) + " bits");

  std::string text;
  text.reserve(len);
  for (std::uint32_t b = 0; b < len; ++b) {
    std::uint32_t byte = 0;
    for (int i = 0; i < 8; ++i)
      byte = (byte << 1) | bit_at(kHeaderBits + 8ull * b + i);
    if (!is_printable_ascii(static_cast<unsigned char>(byte)))
      raise(Errc::NonPrintablePayload,
            "byte " + std::to_string(b) + " is outside printable ASCII");
    text.push_back(static_cast<char>(byte));
  }
  return text;
}

std::optional<std::string> try_lsb_extract(const RasterImage& image) {
  try {
    return lsb_extract(image);
  } catch (const Error&) {
    return std::nullopt;
  }
}

double mean_squared_error(const RasterImage& a, const RasterImage& b) {
  if (!a.same_shape(b))
    raise(Errc::ShapeMismatch, "mse requires equal image shapes");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = double(a.pixels[i]) - double(b.pixels[i]);
    acc += d * d;
  }
  return acc / double(a.pixels.size());
}

}  // namespace classmark::stego
