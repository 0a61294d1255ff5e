#pragma once

// Shared helpers for the test binaries: scratch directories and small
// deterministic inputs.

#include <cstdlib>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "classmark/dataset.hpp"
#include "classmark/errors.hpp"
#include "classmark/image.hpp"

namespace testutil {

/// Runs fn, which must throw classmark::Error, and returns the code.
template <typename Fn>
classmark::Errc thrown_code(Fn&& fn) {
  try {
    fn();
  } catch (const classmark::Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected a classmark::Error, none was thrown");
}

/// Unique directory under the system temp root, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "classmark-XXXXXX").string();
    char* made = ::mkdtemp(tmpl.data());
    if (!made) throw std::runtime_error("mkdtemp failed");
    path = made;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

inline classmark::RasterImage random_image(std::mt19937_64& rng, int h, int w,
                                           int c) {
  classmark::RasterImage img(h, w, c);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& px : img.pixels) px = static_cast<std::uint8_t>(byte(rng));
  return img;
}

inline std::string random_identity(std::mt19937_64& rng, int max_len) {
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_int_distribution<int> ch(0x20, 0x7e);
  std::string s;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) s.push_back(static_cast<char>(ch(rng)));
  return s;
}

/// Small labeled dataset of random images; labels cycle over num_classes.
inline classmark::data::LabeledDataset cycle_dataset(int count, int h, int w,
                                                     int c, int num_classes,
                                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  classmark::data::LabeledDataset ds;
  for (int i = 0; i < count; ++i) {
    ds.images.push_back(random_image(rng, h, w, c));
    ds.labels.push_back(i % num_classes);
  }
  return ds;
}

}  // namespace testutil
