#include "classmark/protocol.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "classmark/errors.hpp"
#include "classmark/png_io.hpp"
#include "classmark/stego.hpp"
#include "classmark/util.hpp"

namespace classmark::wm {

HttpSuspect::HttpSuspect(std::string host, int port, std::string path)
    : host_(std::move(host)), path_(std::move(path)), port_(port) {}

std::vector<int> HttpSuspect::classify(
    const std::vector<RasterImage>& images) {
  nlohmann::json req;
  req["images"] = nlohmann::json::array();
  for (const RasterImage& img : images) {
    const std::vector<std::uint8_t> blob = encode_png(img);
    req["images"].push_back(base64_encode(blob.data(), blob.size()));
  }

  httplib::Client client(host_, port_);
  client.set_read_timeout(30, 0);
  auto res = client.Post(path_, req.dump(), "application/json");
  if (!res || res->status != 200)
    raise(Errc::SuspectUnreachable,
          "suspect endpoint " + host_ + ":" + std::to_string(port_) +
              " did not answer");
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    raise(Errc::SuspectUnreachable, "suspect returned unparseable body");
  }
  if (!body.contains("classes") || !body["classes"].is_array() ||
      body["classes"].size() != images.size())
    raise(Errc::SuspectUnreachable, "suspect answer shape is wrong");
  std::vector<int> out;
  out.reserve(images.size());
  for (const auto& v : body["classes"]) out.push_back(v.get<int>());
  return out;
}

EmbedResult embed_watermark(const nn::ArchSpec& arch,
                            const data::LabeledDataset& train_set,
                            const std::vector<RasterImage>& key_images,
                            keys::FingerprintRegistry& registry,
                            int additional_class, const nn::Hyperparams& hp,
                            const nn::ProgressFn& progress) {
  if (key_images.empty())
    raise(Errc::EmptyKeySet, "watermark embedding needs key images");

  EmbedResult result;
  result.dwm = keys::forge_key_set(key_images, registry, additional_class);

  data::LabeledDataset combined = train_set;
  for (const auto& key : result.dwm) {
    combined.images.push_back(key.image);
    combined.labels.push_back(key.label);
  }

  nn::ModelArtifact blank = nn::build_model(arch, hp.seed);
  result.model = nn::train(blank, combined, hp, progress);
  return result;
}

VerificationReport verify_ownership(
    Suspect& suspect, const std::vector<keys::WatermarkKeySample>& key_pairs,
    const VerificationPolicy& policy) {
  if (key_pairs.empty())
    raise(Errc::EmptyKeySet, "cannot verify with an empty key set");

  std::vector<RasterImage> batch;
  batch.reserve(key_pairs.size());
  for (const auto& key : key_pairs) batch.push_back(key.image);
  const std::vector<int> answers = suspect.classify(batch);
  if (answers.size() != key_pairs.size())
    raise(Errc::SuspectUnreachable, "suspect answered a different batch size");

  VerificationReport report;
  report.policy = policy;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < key_pairs.size(); ++i) {
    report.per_key_predictions.emplace_back(key_pairs[i].owner, answers[i]);
    if (answers[i] == key_pairs[i].label) ++hits;
  }
  report.wm_accuracy = double(hits) / double(key_pairs.size());
  report.pirated = report.wm_accuracy > policy.threshold;
  return report;
}

AuthDecision authenticate_user(const nn::ModelArtifact& model,
                               const RasterImage& submitted_image,
                               const keys::FingerprintRegistry& registry) {
  AuthDecision decision;
  decision.extracted_identity = stego::try_lsb_extract(submitted_image);
  decision.identity_registered =
      decision.extracted_identity &&
      registry.contains(*decision.extracted_identity);

  const int additional_class = model.arch.num_classes - 1;
  const std::vector<int> pred = nn::predict(model, {submitted_image});
  decision.classified_as_additional = pred.front() == additional_class;

  decision.granted =
      decision.identity_registered && decision.classified_as_additional;
  return decision;
}

double compute_fasr(const std::vector<AuthDecision>& decisions) {
  if (decisions.empty()) raise(Errc::EmptyInput, "no auth decisions");
  std::size_t granted = 0;
  for (const auto& d : decisions)
    if (d.granted) ++granted;
  return double(granted) / double(decisions.size());
}

}  // namespace classmark::wm
