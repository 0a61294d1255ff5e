#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "classmark/dataset.hpp"
#include "classmark/net.hpp"

namespace classmark::nn {

enum class Optimizer { Adam, Sgd };
enum class LossKind { CrossEntropy, ReconstructionMse };

struct Hyperparams {
  Optimizer optimizer = Optimizer::Adam;
  double lr = 1e-3;
  double momentum = 0.9;       // sgd only
  double weight_decay = 0.0;   // decoupled; applies to weight tensors, not biases
  int epochs = 1;
  int batch_size = 128;
  LossKind loss = LossKind::CrossEntropy;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch;         // 1-based
  double mean_loss;  // averaged over batches
};

using ProgressFn = std::function<void(const EpochStats&)>;

/// Returns a trained copy; the input model is left untouched.
ModelArtifact train(const ModelArtifact& model, const data::LabeledDataset& data,
                    const Hyperparams& hp, const ProgressFn& progress = {});

std::vector<int> predict(const ModelArtifact& model,
                         const std::vector<RasterImage>& images);

/// Softmax probabilities, one row per image.
std::vector<std::vector<double>> predict_proba(
    const ModelArtifact& model, const std::vector<RasterImage>& images);

double evaluate(const ModelArtifact& model, const data::LabeledDataset& data);

/// Autoencoder output mapped back to 8-bit images.
std::vector<RasterImage> reconstruct(const ModelArtifact& model,
                                     const std::vector<RasterImage>& images);

/// Max relative error between analytic and central-difference gradients over
/// `param_count` randomly chosen parameters, on the given tiny batch.
double gradient_check(const ModelArtifact& model,
                      const data::LabeledDataset& batch, int param_count,
                      std::uint64_t seed);

}  // namespace classmark::nn
