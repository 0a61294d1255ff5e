#pragma once

#include <string>

#include "classmark/net.hpp"

namespace classmark::nn {

/// Writes the model to `path` and returns the path (the storage key).
std::string save_checkpoint(const ModelArtifact& model,
                            const std::string& path);

ModelArtifact load_checkpoint(const std::string& path);

}  // namespace classmark::nn
