#pragma once

#include <cstdint>
#include <string>

#include "classmark/layers.hpp"

namespace classmark::nn {

enum class ArchFamily { Lenet5Like, SmallVggLike, ConvAutoencoder };

std::string family_name(ArchFamily f);
ArchFamily parse_family(const std::string& name);

struct ArchSpec {
  ArchFamily family = ArchFamily::Lenet5Like;
  int input_h = 28;
  int input_w = 28;
  int input_c = 1;
  int num_classes = 0;  // classifiers only; ignored by autoencoders

  bool is_classifier() const { return family != ArchFamily::ConvAutoencoder; }
  bool operator==(const ArchSpec&) const = default;
};

/// A model plus the metadata needed to rebuild, persist, and audit it.
struct ModelArtifact {
  ArchSpec arch;
  std::uint64_t seed = 0;
  int trained_epochs = 0;
  Network net;

  ModelArtifact clone() const;
};

ModelArtifact build_model(const ArchSpec& spec, std::uint64_t seed);

}  // namespace classmark::nn
