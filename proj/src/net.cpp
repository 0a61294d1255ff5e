#include "classmark/net.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "classmark/errors.hpp"

namespace classmark::nn {

std::string family_name(ArchFamily f) {
  switch (f) {
    case ArchFamily::Lenet5Like: return "lenet5-like";
    case ArchFamily::SmallVggLike: return "small-vgg-like";
    case ArchFamily::ConvAutoencoder: return "conv-autoencoder";
  }
  return "?";
}

ArchFamily parse_family(const std::string& name) {
  if (name == "lenet5-like") return ArchFamily::Lenet5Like;
  if (name == "small-vgg-like") return ArchFamily::SmallVggLike;
  if (name == "conv-autoencoder") return ArchFamily::ConvAutoencoder;
  raise(Errc::UnsupportedShape, "unknown model family: " + name);
}

namespace {

void check_spec(const ArchSpec& s) {
  if (s.input_h <= 0 || s.input_w <= 0)
    raise(Errc::UnsupportedShape, "non-positive input extent");
  if (s.input_c != 1 && s.input_c != 3)
    raise(Errc::UnsupportedShape, "input channels must be 1 or 3");
  if (s.is_classifier() && s.num_classes < 2)
    raise(Errc::UnsupportedShape, "classifier needs at least 2 classes");
}

Network make_lenet5_like(const ArchSpec& s) {
  // conv5x5(pad 2) -> pool -> conv5x5 -> pool -> dense 120 -> dense classes
  Network net;
  auto c1 = std::make_unique<Conv2d>(s.input_c, 6, 5, 1, 2, s.input_h,
                                     s.input_w);
  const int h1 = c1->out_h() / 2, w1 = c1->out_w() / 2;
  if (h1 < 5 || w1 < 5) raise(Errc::UnsupportedShape, "input too small");
  auto c2 = std::make_unique<Conv2d>(6, 16, 5, 1, 0, h1, w1);
  const int h2 = c2->out_h() / 2, w2 = c2->out_w() / 2;
  if (h2 < 1 || w2 < 1) raise(Errc::UnsupportedShape, "input too small");
  const int flat = 16 * h2 * w2;

  net.layers.push_back(std::move(c1));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(std::make_unique<MaxPool2>());
  net.layers.push_back(std::move(c2));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(std::make_unique<MaxPool2>());
  net.layers.push_back(std::make_unique<Flatten>());
  net.layers.push_back(std::make_unique<Dense>(flat, 120));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(std::make_unique<Dense>(120, s.num_classes));
  return net;
}

Network make_small_vgg_like(const ArchSpec& s) {
  // Two conv-conv-pool blocks, then dense 128 -> classes.
  if (s.input_h % 4 != 0 || s.input_w % 4 != 0)
    raise(Errc::UnsupportedShape, "extents must be divisible by 4");
  Network net;
  net.layers.push_back(
      std::make_unique<Conv2d>(s.input_c, 16, 3, 1, 1, s.input_h, s.input_w));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(
      std::make_unique<Conv2d>(16, 16, 3, 1, 1, s.input_h, s.input_w));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(std::make_unique<MaxPool2>());
  const int h1 = s.input_h / 2, w1 = s.input_w / 2;
  net.layers.push_back(std::make_unique<Conv2d>(16, 32, 3, 1, 1, h1, w1));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(std::make_unique<Conv2d>(32, 32, 3, 1, 1, h1, w1));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(std::make_unique<MaxPool2>());
  const int flat = 32 * (h1 / 2) * (w1 / 2);
  net.layers.push_back(std::make_unique<Flatten>());
  net.layers.push_back(std::make_unique<Dense>(flat, 128));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(std::make_unique<Dense>(128, s.num_classes));
  return net;
}

Network make_conv_autoencoder(const ArchSpec& s) {
  // Two stride-2 conv stages down, two upsample+conv stages back up.
  if (s.input_h % 4 != 0 || s.input_w % 4 != 0)
    raise(Errc::UnsupportedShape, "extents must be divisible by 4");
  Network net;
  net.layers.push_back(
      std::make_unique<Conv2d>(s.input_c, 16, 3, 2, 1, s.input_h, s.input_w));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(
      std::make_unique<Conv2d>(16, 8, 3, 2, 1, s.input_h / 2, s.input_w / 2));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(std::make_unique<UpsampleNearest2>());
  net.layers.push_back(
      std::make_unique<Conv2d>(8, 16, 3, 1, 1, s.input_h / 2, s.input_w / 2));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(std::make_unique<UpsampleNearest2>());
  net.layers.push_back(
      std::make_unique<Conv2d>(16, s.input_c, 3, 1, 1, s.input_h, s.input_w));
  net.layers.push_back(std::make_unique<Sigmoid>());
  return net;
}

void init_params(Network& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (auto& p : net.params()) {
    if (!p.is_weight) continue;  // biases start at zero
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < p.shape.size(); ++d)
      fan_in *= std::size_t(p.shape[d]);
    std::normal_distribution<double> dist(0.0,
                                          std::sqrt(2.0 / double(fan_in)));
    for (double& v : *p.value) v = dist(rng);
  }
}

}  // namespace

ModelArtifact build_model(const ArchSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  ModelArtifact m;
  m.arch = spec;
  m.seed = seed;
  switch (spec.family) {
    case ArchFamily::Lenet5Like: m.net = make_lenet5_like(spec); break;
    case ArchFamily::SmallVggLike: m.net = make_small_vgg_like(spec); break;
    case ArchFamily::ConvAutoencoder: m.net = make_conv_autoencoder(spec); break;
  }
  init_params(m.net, seed);
  return m;
}

ModelArtifact ModelArtifact::clone() const {
  ModelArtifact out = build_model(arch, seed);
  out.trained_epochs = trained_epochs;
  auto src = const_cast<ModelArtifact*>(this)->net.params();
  auto dst = out.net.params();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].value = *src[i].value;
  return out;
}

}  // namespace classmark::nn
