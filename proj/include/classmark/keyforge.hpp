#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "classmark/dataset.hpp"
#include "classmark/image.hpp"

namespace classmark::keys {

struct RegistryEntry {
  int user_id = 0;
  std::string identity;
  std::string key_image_ref;  // storage key, filled once keys are written
  std::string content_hash;   // of the embedded key image
};

struct FingerprintRegistry {
  std::vector<RegistryEntry> entries;

  bool contains(const std::string& identity) const;
  const RegistryEntry* find(const std::string& identity) const;
};

struct WatermarkKeySample {
  RasterImage image;  // post-embedding
  int label = 0;      // the additional class index
  int owner = 0;      // user_id
};

/// Identities from an indexed template: every "{i}" becomes the user id.
FingerprintRegistry mint_fingerprints(int count,
                                      const std::string& identity_template);

/// Deterministic draw of `count` images of the named class.
std::vector<RasterImage> select_key_images(const data::LabeledDataset& source,
                                           const std::string& class_filter,
                                           int count, std::uint64_t seed);

std::vector<WatermarkKeySample> forge_key_set(
    const std::vector<RasterImage>& images, FingerprintRegistry& registry,
    int additional_class);

/// Registry round-trip as a JSON file.
void save_registry(const FingerprintRegistry& registry,
                   const std::string& path);
FingerprintRegistry load_registry(const std::string& path);

/// Key images as PNG files under `dir` plus a keyset.json index, updating
/// key_image_refs.
void save_key_images(std::vector<WatermarkKeySample>& keys,
                     FingerprintRegistry& registry, const std::string& dir);

std::vector<WatermarkKeySample> load_key_set(const std::string& dir);

}  // namespace classmark::keys
