#include "classmark/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "classmark/errors.hpp"

namespace classmark::attacks {

std::pair<nn::ModelArtifact, data::LabeledDataset> finetune_attack(
    const nn::ModelArtifact& model, const data::LabeledDataset& test_set,
    const FinetuneConfig& cfg, const nn::ProgressFn& progress) {
  if (test_set.empty()) raise(Errc::EmptyDataset, "no data to fine-tune on");

  std::vector<std::size_t> order(test_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto cut = std::size_t(double(order.size()) * cfg.data_fraction);
  const std::vector<std::size_t> tune_idx(order.begin(), order.begin() + cut);
  const std::vector<std::size_t> held_idx(order.begin() + cut, order.end());

  data::LabeledDataset tune = test_set.subset(tune_idx);
  data::LabeledDataset held = test_set.subset(held_idx);

  if (cfg.epochs == 0) return {model.clone(), std::move(held)};

  nn::Hyperparams hp;
  hp.optimizer = nn::Optimizer::Sgd;
  hp.lr = cfg.lr;
  hp.momentum = cfg.momentum;
  hp.epochs = cfg.epochs;
  hp.loss = nn::LossKind::CrossEntropy;
  hp.seed = cfg.seed;
  return {nn::train(model, tune, hp, progress), std::move(held)};
}

nn::ModelArtifact prune_attack(const nn::ModelArtifact& model,
                               const PruneConfig& cfg) {
  if (cfg.rate < 0.0 || cfg.rate > 1.0)
    raise(Errc::InvalidPruneRate,
          "rate " + std::to_string(cfg.rate) + " outside [0,1]");

  nn::ModelArtifact out = model.clone();
  for (auto& p : out.net.params()) {
    if (!p.is_weight) continue;
    auto& w = *p.value;
    const auto kill = std::size_t(cfg.rate * double(w.size()));
    if (kill == 0) continue;
    std::vector<std::size_t> idx(w.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Ties broken by traversal order: stable partial ordering on |w|.
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) {
                       return std::abs(w[a]) < std::abs(w[b]);
                     });
    for (std::size_t i = 0; i < kill; ++i) w[idx[i]] = 0.0;
  }
  return out;
}

DenoiserArtifact train_denoiser(const data::LabeledDataset& train_subset,
                                const nn::Hyperparams& hp,
                                double train_fraction,
                                const nn::ProgressFn& progress) {
  if (train_subset.empty())
    raise(Errc::EmptyDataset, "denoiser needs training images");
  const RasterImage& first = train_subset.images.front();

  nn::ArchSpec arch;
  arch.family = nn::ArchFamily::ConvAutoencoder;
  arch.input_h = first.height;
  arch.input_w = first.width;
  arch.input_c = first.channels;

  nn::Hyperparams ae_hp = hp;
  ae_hp.loss = nn::LossKind::ReconstructionMse;

  DenoiserArtifact out{nn::build_model(arch, hp.seed), train_fraction};
  out.autoencoder = nn::train(out.autoencoder, train_subset, ae_hp, progress);
  return out;
}

std::vector<keys::WatermarkKeySample> query_modification(
    const DenoiserArtifact& denoiser,
    const std::vector<keys::WatermarkKeySample>& keys) {
  std::vector<RasterImage> batch;
  batch.reserve(keys.size());
  for (const auto& key : keys) batch.push_back(key.image);

  const std::vector<RasterImage> cleaned =
      nn::reconstruct(denoiser.autoencoder, batch);

  std::vector<keys::WatermarkKeySample> out = keys;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].image = cleaned[i];
  return out;
}

namespace {

// "TEST" as a 5-row bitmap, glyphs 3 wide with 1-column gaps.
constexpr int kLogoRows = 5;
constexpr int kLogoCols = 15;
constexpr const char* kLogo[kLogoRows] = {
    "### ### ### ###",
    " #  #   #    # ",
    " #  ##  ###  # ",
    " #  #     #  # ",
    " #  ### ###  # ",
};

}  // namespace

std::pair<int, int> logo_extent() { return {kLogoRows, kLogoCols}; }

std::vector<keys::WatermarkKeySample> gen_logo_keys(
    const std::vector<RasterImage>& images, const LogoConfig& cfg) {
  std::vector<keys::WatermarkKeySample> out;
  out.reserve(images.size());
  int owner = 0;
  for (const RasterImage& src : images) {
    if (cfg.row + kLogoRows > src.height || cfg.col + kLogoCols > src.width)
      raise(Errc::LogoLargerThanImage,
            "logo does not fit a " + std::to_string(src.height) + "x" +
                std::to_string(src.width) + " image at the given corner");
    keys::WatermarkKeySample sample;
    sample.image = src;
    sample.label = cfg.target;
    sample.owner = owner++;
    for (int r = 0; r < kLogoRows; ++r)
      for (int c = 0; c < kLogoCols; ++c) {
        if (kLogo[r][c] != '#') continue;
        for (int ch = 0; ch < src.channels; ++ch) {
          double v = sample.image.at(cfg.row + r, cfg.col + c, ch);
          v = (1.0 - cfg.opacity) * v + cfg.opacity * 255.0;
          sample.image.at(cfg.row + r, cfg.col + c, ch) =
              std::uint8_t(std::lround(v));
        }
      }
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<keys::WatermarkKeySample> gen_noise_keys(
    const std::vector<RasterImage>& images, const NoiseConfig& cfg) {
  if (cfg.noise_scale < 0.0)
    raise(Errc::NonPositiveNoiseScale, "negative noise scale");

  std::vector<keys::WatermarkKeySample> out;
  out.reserve(images.size());
  if (images.empty()) return out;

  const RasterImage& first = images.front();
  std::vector<double> field(first.pixels.size(), 0.0);
  if (cfg.noise_scale > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> dist(0.0, cfg.noise_scale);
    for (double& v : field) v = dist(rng);
  }

  int owner = 0;
  for (const RasterImage& src : images) {
    if (src.pixels.size() != field.size())
      raise(Errc::ShapeMismatch, "noise keys need same-shaped images");
    keys::WatermarkKeySample sample;
    sample.image = src;
    sample.label = cfg.target;
    sample.owner = owner++;
    for (std::size_t i = 0; i < field.size(); ++i) {
      const double v = double(src.pixels[i]) + field[i];
      sample.image.pixels[i] = std::uint8_t(std::clamp(v, 0.0, 255.0));
    }
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace classmark::attacks
