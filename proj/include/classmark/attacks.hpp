#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "classmark/dataset.hpp"
#include "classmark/keyforge.hpp"
#include "classmark/net.hpp"
#include "classmark/train.hpp"

namespace classmark::attacks {

struct PruneConfig {
  double rate = 0.0;  // fraction of each weight tensor zeroed, in [0,1]
};

struct FinetuneConfig {
  double data_fraction = 0.5;  // share of the test set used for tuning
  int epochs = 30;
  double lr = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

struct DenoiserArtifact {
  nn::ModelArtifact autoencoder;
  double train_fraction = 0.0;
};

struct LogoConfig {
  int target = 0;        // existing class the keys are labeled with
  double opacity = 0.5;  // blend factor toward white on lit cells
  int row = 2;           // top-left corner of the stamp
  int col = 2;
};

struct NoiseConfig {
  int target = 0;
  double noise_scale = 17.0;  // Gaussian sigma in 8-bit pixel units
  std::uint64_t seed = 0;
};

/// Splits the test set per cfg, fine-tunes on one half with SGD, and
/// returns the attacked model together with the untouched half.
std::pair<nn::ModelArtifact, data::LabeledDataset> finetune_attack(
    const nn::ModelArtifact& model, const data::LabeledDataset& test_set,
    const FinetuneConfig& cfg, const nn::ProgressFn& progress = {});

/// Per weight tensor, zeroes the floor(rate * n) entries with the smallest
/// absolute values (ties by traversal order). Biases are untouched.
nn::ModelArtifact prune_attack(const nn::ModelArtifact& model,
                               const PruneConfig& cfg);

DenoiserArtifact train_denoiser(const data::LabeledDataset& train_subset,
                                const nn::Hyperparams& hp,
                                double train_fraction,
                                const nn::ProgressFn& progress = {});

/// Replaces every key image with its autoencoder reconstruction,
/// re-quantized to 8 bits. Labels and owners are preserved.
std::vector<keys::WatermarkKeySample> query_modification(
    const DenoiserArtifact& denoiser,
    const std::vector<keys::WatermarkKeySample>& keys);

/// Baseline watermark schemes: in-distribution images carrying a visible
/// trigger, labeled with an existing target class.
std::vector<keys::WatermarkKeySample> gen_logo_keys(
    const std::vector<RasterImage>& images, const LogoConfig& cfg);

/// One seeded Gaussian noise field, shared across the batch so the trigger
/// is a learnable pattern; pixels clipped back to [0,255].
std::vector<keys::WatermarkKeySample> gen_noise_keys(
    const std::vector<RasterImage>& images, const NoiseConfig& cfg);

/// Pixel shape of the stamped logo bitmap, for placement checks.
std::pair<int, int> logo_extent();

}  // namespace classmark::attacks
