#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "classmark/image.hpp"

namespace classmark::data {

enum class Split { Train, Test };

struct LabeledDataset {
  std::vector<RasterImage> images;
  std::vector<int> labels;
  Split split = Split::Train;
  std::vector<std::string> class_names;  // optional; index == class label

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }

  /// New dataset holding the given rows, same split/class names.
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

int resolve_class_name(const LabeledDataset& ds, const std::string& name);

/// Uncompressed or gzip-compressed IDX files (the MNIST family layout).
std::vector<RasterImage> read_idx_images(const std::string& path);
std::vector<int> read_idx_labels(const std::string& path);
void write_idx_images(const std::string& path,
                      const std::vector<RasterImage>& images);
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

struct DatasetBundle {
  LabeledDataset train;
  LabeledDataset test;
};

/// Loads `train-images-idx3-ubyte` / `train-labels-idx1-ubyte` /
/// `t10k-images-idx3-ubyte` / `t10k-labels-idx1-ubyte` (optionally .gz) from
/// `root`. When `root/manifest.json` exists, per-file CRC32 and sizes are
/// verified; header-declared counts are always checked against file sizes.
DatasetBundle ingest_dataset(const std::string& root);

/// Writes a bundle in the layout ingest_dataset expects, including a
/// manifest with per-file checksums.
void write_dataset_archive(const std::string& root, const DatasetBundle& bundle);

// ---------------------------------------------------------------------------
// Built-in deterministic sample generators. They produce desk-scale stand-ins
// with the Fashion-MNIST / MNIST shapes so end-to-end runs stay hermetic;
// point the config at real IDX archives to run on downloaded data instead.
// ---------------------------------------------------------------------------

struct GarmentSynthConfig {
  int train_count = 30000;
  int test_count = 10000;
  std::uint32_t seed = 1;
  /// Fraction of labels flipped to a random other class. This is the
  /// irreducible error of the stand-in task; it pins the achievable test
  /// accuracy near the low 90s the way real garment data does.
  double label_noise = 0.093;
};

/// Ten procedural texture/shape classes on 28x28 grayscale, noisy background.
DatasetBundle synth_garments(const GarmentSynthConfig& cfg);

struct DigitSynthConfig {
  int train_count = 60000;
  int test_count = 10000;
  std::uint32_t seed = 2;
};

/// Ten stroke-digit classes on 28x28 grayscale with pure black background,
/// class frequencies matching the classic handwritten-digit corpus. Class "0"
/// is the default watermark key source.
DatasetBundle synth_digits(const DigitSynthConfig& cfg);

}  // namespace classmark::data
