#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "classmark/dataset.hpp"
#include "classmark/keyforge.hpp"
#include "classmark/net.hpp"
#include "classmark/train.hpp"

namespace classmark::wm {

struct VerificationPolicy {
  double threshold = 0.9;  // verdict is "pirated" iff wm_accuracy > threshold
};

struct VerificationReport {
  std::vector<std::pair<int, int>> per_key_predictions;  // (key id, class)
  double wm_accuracy = 0.0;
  bool pirated = false;
  VerificationPolicy policy;
};

struct AuthDecision {
  std::optional<std::string> extracted_identity;
  bool identity_registered = false;
  bool classified_as_additional = false;
  bool granted = false;
};

/// Black-box prediction interface: a batch of images in, top-1 class
/// indices out. Local checkpoints and remote endpoints both adapt to it.
class Suspect {
 public:
  virtual ~Suspect() = default;
  virtual std::vector<int> classify(
      const std::vector<RasterImage>& images) = 0;
};

class LocalSuspect final : public Suspect {
 public:
  explicit LocalSuspect(const nn::ModelArtifact& model) : model_(&model) {}
  std::vector<int> classify(const std::vector<RasterImage>& images) override {
    return nn::predict(*model_, images);
  }

 private:
  const nn::ModelArtifact* model_;
};

/// Wraps another suspect and counts queries, for budget audits.
class CountingSuspect final : public Suspect {
 public:
  explicit CountingSuspect(Suspect& inner) : inner_(&inner) {}
  std::vector<int> classify(const std::vector<RasterImage>& images) override {
    queries_ += long(images.size());
    return inner_->classify(images);
  }
  long queries() const { return queries_; }

 private:
  Suspect* inner_;
  long queries_ = 0;
};

/// Talks to a remote suspect: POSTs base64 PNG batches as JSON, expects a
/// JSON array of class indices back.
class HttpSuspect final : public Suspect {
 public:
  HttpSuspect(std::string host, int port, std::string path = "/classify");
  std::vector<int> classify(const std::vector<RasterImage>& images) override;

 private:
  std::string host_, path_;
  int port_;
};

struct EmbedResult {
  nn::ModelArtifact model;
  std::vector<keys::WatermarkKeySample> dwm;
};

/// Forges the key set, unions it with the training data under the
/// additional class, and trains a (C+1)-class model.
EmbedResult embed_watermark(const nn::ArchSpec& arch,
                            const data::LabeledDataset& train_set,
                            const std::vector<RasterImage>& key_images,
                            keys::FingerprintRegistry& registry,
                            int additional_class, const nn::Hyperparams& hp,
                            const nn::ProgressFn& progress = {});

VerificationReport verify_ownership(
    Suspect& suspect, const std::vector<keys::WatermarkKeySample>& key_pairs,
    const VerificationPolicy& policy);

AuthDecision authenticate_user(const nn::ModelArtifact& model,
                               const RasterImage& submitted_image,
                               const keys::FingerprintRegistry& registry);

double compute_fasr(const std::vector<AuthDecision>& decisions);

}  // namespace classmark::wm
