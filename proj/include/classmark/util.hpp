#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace classmark {

// FNV-1a, used for content ids and config hashes. Not cryptographic.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(s.data(), s.size());
}

std::string hex64(std::uint64_t value);

inline bool is_printable_ascii(unsigned char c) { return c >= 0x20 && c <= 0x7e; }

bool is_printable_ascii(std::string_view s);

std::string base64_encode(const std::uint8_t* data, std::size_t n);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace classmark
