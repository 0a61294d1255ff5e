#include "classmark/util.hpp"

#include <array>
#include <cstdio>
#include <stdexcept>

namespace classmark {

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return std::string(buf);
}

bool is_printable_ascii(std::string_view s) {
  for (unsigned char c : s)
    if (!is_printable_ascii(c)) return false;
  return true;
}

namespace {
constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::array<int, 256> build_b64_inverse() {
  std::array<int, 256> inv{};
  inv.fill(-1);
  for (int i = 0; i < 64; ++i)
    inv[static_cast<unsigned char>(kB64Alphabet[i])] = i;
  return inv;
}
}  // namespace

std::string base64_encode(const std::uint8_t* data, std::size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (std::size_t i = 0; i < n; i += 3) {
    std::uint32_t chunk = std::uint32_t(data[i]) << 16;
    if (i + 1 < n) chunk |= std::uint32_t(data[i + 1]) << 8;
    if (i + 2 < n) chunk |= std::uint32_t(data[i + 2]);
    out.push_back(kB64Alphabet[(chunk >> 18) & 63]);
    out.push_back(kB64Alphabet[(chunk >> 12) & 63]);
    out.push_back(i + 1 < n ? kB64Alphabet[(chunk >> 6) & 63] : '=');
    out.push_back(i + 2 < n ? kB64Alphabet[chunk & 63] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  static const std::array<int, 256> inv = build_b64_inverse();
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t chunk = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    int v = inv[static_cast<unsigned char>(c)];
    if (v < 0) throw std::invalid_argument("invalid base64 character");
    chunk = (chunk << 6) | std::uint32_t(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((chunk >> bits) & 0xff));
    }
  }
  return out;
}

}  // namespace classmark
