#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "classmark/image.hpp"

namespace classmark::stego {

/// One message bit per element, values 0 or 1.
using BitSeq = std::vector<std::uint8_t>;

/// A user identity together with its wire encoding.
struct FingerprintRecord {
  std::string identity;
  BitSeq wire_bits;
};

struct BitBudget {
  int planes_used = 1;
  long long total_bits = 0;
};

/// Wire format: 32-bit big-endian payload byte count, then each character's
/// 8 bits most-significant first. The payload must be non-empty printable
/// 7-bit text; anything else fails extraction and is how forged or clean
/// images are detected.
BitSeq encode_payload(std::string_view identity);

inline FingerprintRecord make_fingerprint(std::string_view identity) {
  return FingerprintRecord{std::string(identity), encode_payload(identity)};
}

/// Bits a shape can carry using the lowest `planes` bit planes.
long long capacity(int height, int width, int channels, int planes);

inline long long capacity(const RasterImage& img, int planes) {
  return capacity(img.height, img.width, img.channels, planes);
}

inline BitBudget bit_budget(const RasterImage& img, int planes) {
  return BitBudget{planes, capacity(img, planes)};
}

/// Writes payload bits into the image. Traversal is row-major and
/// channel-minor; bit plane 0 is filled across the whole image before any
/// bit goes to plane 1. Pixels past the consumed bit count are untouched.
RasterImage lsb_embed(const RasterImage& image, const BitSeq& payload);

/// Reverse of lsb_embed: reads the 32-bit length header, then that many
/// payload bytes. Throws MalformedHeader when the declared length cannot
/// fit the image, NonPrintablePayload when decoded bytes fall outside
/// printable 7-bit ASCII.
std::string lsb_extract(const RasterImage& image);

/// lsb_extract that reports failure as nullopt instead of throwing.
std::optional<std::string> try_lsb_extract(const RasterImage& image);

/// Mean squared pixel difference on raw 0-255 values.
double mean_squared_error(const RasterImage& a, const RasterImage& b);

}  // namespace classmark::stego
