#include "classmark/dataset.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "classmark/errors.hpp"
#include "classmark/util.hpp"
#include "nlohmann/json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace classmark::data {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::DatasetMissing, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK)
    raise(Errc::IoError, "inflateInit2 failed");
  std::vector<std::uint8_t> out;
  out.reserve(in.size() * 4);
  std::uint8_t buf[1 << 16];
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      raise(Errc::ChecksumMismatch, "gzip stream corrupt or truncated");
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> read_maybe_gz(const std::string& path) {
  auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
    return gunzip(bytes);
  return bytes;
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16),
                             std::uint8_t(v >> 8), std::uint8_t(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::string existing_variant(const std::string& root, const std::string& base) {
  for (const char* suffix : {"", ".gz"}) {
    std::string p = root + "/" + base + suffix;
    if (fs::exists(p)) return p;
  }
  raise(Errc::DatasetMissing, "missing " + base + "[.gz] under " + root);
}

}  // namespace

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.split = split;
  out.class_names = class_names;
  out.images.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.images.push_back(images[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

int resolve_class_name(const LabeledDataset& ds, const std::string& name) {
  for (std::size_t i = 0; i < ds.class_names.size(); ++i)
    if (ds.class_names[i] == name) return static_cast<int>(i);
  // No name table: accept a bare class index.
  try {
    std::size_t pos = 0;
    int v = std::stoi(name, &pos);
    if (pos == name.size() && v >= 0) return v;
  } catch (...) {
  }
  raise(Errc::ConfigInvalid, "unknown class name \"" + name + "\"");
}

std::vector<RasterImage> read_idx_images(const std::string& path) {
  auto bytes = read_maybe_gz(path);
  if (bytes.size() < 16) raise(Errc::UnknownLayout, path + ": too short for IDX");
  if (be32(bytes.data()) != kImageMagic)
    raise(Errc::UnknownLayout, path + ": bad IDX image magic");
  const std::uint32_t count = be32(bytes.data() + 4);
  const std::uint32_t rows = be32(bytes.data() + 8);
  const std::uint32_t cols = be32(bytes.data() + 12);
  const std::size_t need = 16 + std::size_t(count) * rows * cols;
  if (bytes.size() != need)
    raise(Errc::ChecksumMismatch,
          path + ": expected " + std::to_string(need) + " bytes, have " +
              std::to_string(bytes.size()));
  std::vector<RasterImage> images;
  images.reserve(count);
  const std::uint8_t* p = bytes.data() + 16;
  for (std::uint32_t i = 0; i < count; ++i) {
    RasterImage img(int(rows), int(cols), 1);
    std::memcpy(img.pixels.data(), p, std::size_t(rows) * cols);
    p += std::size_t(rows) * cols;
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<int> read_idx_labels(const std::string& path) {
  auto bytes = read_maybe_gz(path);
  if (bytes.size() < 8) raise(Errc::UnknownLayout, path + ": too short for IDX");
  if (be32(bytes.data()) != kLabelMagic)
    raise(Errc::UnknownLayout, path + ": bad IDX label magic");
  const std::uint32_t count = be32(bytes.data() + 4);
  if (bytes.size() != 8 + std::size_t(count))
    raise(Errc::ChecksumMismatch, path + ": label file truncated");
  std::vector<int> labels(count);
  for (std::uint32_t i = 0; i < count; ++i) labels[i] = bytes[8 + i];
  return labels;
}

void write_idx_images(const std::string& path,
                      const std::vector<RasterImage>& images) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::IoError, "cannot open " + path);
  const int rows = images.empty() ? 0 : images.front().height;
  const int cols = images.empty() ? 0 : images.front().width;
  put_be32(out, kImageMagic);
  put_be32(out, std::uint32_t(images.size()));
  put_be32(out, std::uint32_t(rows));
  put_be32(out, std::uint32_t(cols));
  for (const auto& img : images) {
    if (img.height != rows || img.width != cols || img.channels != 1)
      raise(Errc::ShapeMismatch, "IDX archives hold uniform grayscale images");
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              std::streamsize(img.pixels.size()));
  }
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::IoError, "cannot open " + path);
  put_be32(out, kLabelMagic);
  put_be32(out, std::uint32_t(labels.size()));
  for (int l : labels) {
    if (l < 0 || l > 255) raise(Errc::LabelOutOfRange, "IDX labels are bytes");
    out.put(static_cast<char>(l));
  }
}

namespace {

const char* kFileNames[4] = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                             "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};

void verify_manifest(const std::string& root, std::vector<std::string>* names) {
  const std::string mpath = root + "/manifest.json";
  if (!fs::exists(mpath)) return;
  json m;
  try {
    std::ifstream in(mpath);
    in >> m;
  } catch (const std::exception& e) {
    raise(Errc::ConfigInvalid, std::string("manifest.json: ") + e.what());
  }
  if (m.contains("class_names"))
    *names = m["class_names"].get<std::vector<std::string>>();
  if (!m.contains("files")) return;
  for (auto& [name, entry] : m["files"].items()) {
    const std::string path = root + "/" + name;
    if (!fs::exists(path)) raise(Errc::DatasetMissing, "manifest names " + path);
    auto bytes = read_file(path);
    if (entry.contains("size") &&
        entry["size"].get<std::uint64_t>() != bytes.size())
      raise(Errc::ChecksumMismatch, name + ": size differs from manifest");
    if (entry.contains("crc32")) {
      const auto crc =
          ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size()));
      if (entry["crc32"].get<std::uint32_t>() != crc)
        raise(Errc::ChecksumMismatch, name + ": crc32 differs from manifest");
    }
  }
}

}  // namespace

DatasetBundle ingest_dataset(const std::string& root) {
  if (!fs::is_directory(root))
    raise(Errc::DatasetMissing, root + " is not a directory");
  std::vector<std::string> names;
  verify_manifest(root, &names);

  DatasetBundle bundle;
  bundle.train.split = Split::Train;
  bundle.test.split = Split::Test;
  bundle.train.images = read_idx_images(existing_variant(root, kFileNames[0]));
  bundle.train.labels = read_idx_labels(existing_variant(root, kFileNames[1]));
  bundle.test.images = read_idx_images(existing_variant(root, kFileNames[2]));
  bundle.test.labels = read_idx_labels(existing_variant(root, kFileNames[3]));
  if (bundle.train.images.size() != bundle.train.labels.size() ||
      bundle.test.images.size() != bundle.test.labels.size())
    raise(Errc::ChecksumMismatch, root + ": image/label counts differ");
  bundle.train.class_names = names;
  bundle.test.class_names = names;
  return bundle;
}

void write_dataset_archive(const std::string& root, const DatasetBundle& bundle) {
  fs::create_directories(root);
  write_idx_images(root + "/" + kFileNames[0], bundle.train.images);
  write_idx_labels(root + "/" + kFileNames[1], bundle.train.labels);
  write_idx_images(root + "/" + kFileNames[2], bundle.test.images);
  write_idx_labels(root + "/" + kFileNames[3], bundle.test.labels);

  json manifest;
  for (const char* name : kFileNames) {
    const auto bytes = read_file(root + "/" + name);
    manifest["files"][name] = {
        {"size", bytes.size()},
        {"crc32", ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size()))}};
  }
  if (!bundle.train.class_names.empty())
    manifest["class_names"] = bundle.train.class_names;
  std::ofstream out(root + "/manifest.json");
  out << manifest.dump(2) << "\n";
}

}  // namespace classmark::data
