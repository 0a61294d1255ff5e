#include "classmark/keyforge.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "classmark/errors.hpp"
#include "classmark/png_io.hpp"
#include "classmark/stego.hpp"
#include "classmark/util.hpp"

namespace classmark::keys {

bool FingerprintRegistry::contains(const std::string& identity) const {
  return find(identity) != nullptr;
}

const RegistryEntry* FingerprintRegistry::find(
    const std::string& identity) const {
  for (const auto& e : entries)
    if (e.identity == identity) return &e;
  return nullptr;
}

FingerprintRegistry mint_fingerprints(int count,
                                      const std::string& identity_template) {
  if (count < 1) raise(Errc::EmptyInput, "registry needs at least one user");
  if (identity_template.find("{i}") == std::string::npos)
    raise(Errc::ConfigInvalid, "identity template lacks an {i} placeholder");

  FingerprintRegistry reg;
  reg.entries.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) {
    std::string id = identity_template;
    for (std::size_t pos; (pos = id.find("{i}")) != std::string::npos;)
      id.replace(pos, 3, std::to_string(i));
    if (reg.contains(id))
      raise(Errc::DuplicateIdentity, "identity collides: " + id);
    reg.entries.push_back({i, std::move(id), "", ""});
  }
  return reg;
}

std::vector<RasterImage> select_key_images(const data::LabeledDataset& source,
                                           const std::string& class_filter,
                                           int count, std::uint64_t seed) {
  const int wanted = data::resolve_class_name(source, class_filter);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < source.size(); ++i)
    if (source.labels[i] == wanted) pool.push_back(i);
  if (int(pool.size()) < count)
    raise(Errc::InsufficientSourceImages,
          "only " + std::to_string(pool.size()) + " images of class " +
              class_filter + ", need " + std::to_string(count));

  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::size_t(count));

  std::vector<RasterImage> out;
  out.reserve(pool.size());
  for (std::size_t i : pool) out.push_back(source.images[i]);
  if (!out.empty()) {
    const RasterImage& first = out.front();
    for (const RasterImage& img : out)
      if (!img.same_shape(first))
        raise(Errc::ShapeIncompatible, "key images disagree on shape");
  }
  return out;
}

std::vector<WatermarkKeySample> forge_key_set(
    const std::vector<RasterImage>& images, FingerprintRegistry& registry,
    int additional_class) {
  if (images.size() != registry.entries.size())
    raise(Errc::CountMismatch,
          std::to_string(images.size()) + " images for " +
              std::to_string(registry.entries.size()) + " registry entries");

  std::vector<WatermarkKeySample> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto& entry = registry.entries[i];
    const stego::BitSeq wire = stego::encode_payload(entry.identity);
    if (static_cast<long long>(wire.size()) > stego::capacity(images[i], 2))
      raise(Errc::CapacityExceeded,
            "fingerprint for " + entry.identity + " needs " +
                std::to_string(wire.size()) + " bits");
    WatermarkKeySample sample;
    sample.image = stego::lsb_embed(images[i], wire);
    sample.label = additional_class;
    sample.owner = entry.user_id;
    entry.content_hash =
        hex64(fnv1a64(sample.image.pixels.data(), sample.image.pixels.size()));
    out.push_back(std::move(sample));
  }
  return out;
}

void save_registry(const FingerprintRegistry& registry,
                   const std::string& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& e : registry.entries)
    doc.push_back({{"user_id", e.user_id},
                   {"identity", e.identity},
                   {"key_image_ref", e.key_image_ref},
                   {"content_hash", e.content_hash}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(Errc::IoError, "cannot write " + path);
  out << doc.dump(2) << '\n';
}

FingerprintRegistry load_registry(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot read " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::ConfigInvalid, std::string("registry parse: ") + e.what());
  }
  FingerprintRegistry reg;
  for (const auto& item : doc) {
    RegistryEntry e;
    e.user_id = item.at("user_id").get<int>();
    e.identity = item.at("identity").get<std::string>();
    e.key_image_ref = item.value("key_image_ref", "");
    e.content_hash = item.value("content_hash", "");
    if (reg.contains(e.identity))
      raise(Errc::DuplicateIdentity, "identity collides: " + e.identity);
    reg.entries.push_back(std::move(e));
  }
  return reg;
}

void save_key_images(std::vector<WatermarkKeySample>& keys,
                     FingerprintRegistry& registry, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  for (auto& key : keys) {
    auto it = std::find_if(
        registry.entries.begin(), registry.entries.end(),
        [&](const RegistryEntry& e) { return e.user_id == key.owner; });
    if (it == registry.entries.end())
      raise(Errc::CountMismatch,
            "key owner " + std::to_string(key.owner) + " not in registry");
    const std::string name = "key_" + std::to_string(key.owner) + ".png";
    const std::string path = (fs::path(dir) / name).string();
    write_png(path, key.image);
    it->key_image_ref = path;
    index.push_back(
        {{"owner", key.owner}, {"label", key.label}, {"file", name}});
  }
  std::ofstream out(fs::path(dir) / "keyset.json", std::ios::trunc);
  if (!out) raise(Errc::IoError, "cannot write keyset index in " + dir);
  out << index.dump(2) << '\n';
}

std::vector<WatermarkKeySample> load_key_set(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "keyset.json");
  if (!in) raise(Errc::IoError, "no keyset.json in " + dir);
  nlohmann::json index;
  try {
    in >> index;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::ConfigInvalid, std::string("keyset parse: ") + e.what());
  }
  std::vector<WatermarkKeySample> keys;
  for (const auto& item : index) {
    WatermarkKeySample key;
    key.owner = item.at("owner").get<int>();
    key.label = item.at("label").get<int>();
    key.image =
        read_png((fs::path(dir) / item.at("file").get<std::string>()).string());
    keys.push_back(std::move(key));
  }
  return keys;
}

}  // namespace classmark::keys
