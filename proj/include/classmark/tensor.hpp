#pragma once

#include <cstddef>
#include <vector>

namespace classmark::nn {

/// Dense row-major tensor of doubles. Activations are [batch, ch, h, w],
/// dense activations [batch, features].
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return s.empty() ? 0 : n;
  }

  std::size_t numel() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  Tensor reshaped(std::vector<int> s) const {
    Tensor t;
    t.shape = std::move(s);
    t.data = data;
    return t;
  }
};

}  // namespace classmark::nn
