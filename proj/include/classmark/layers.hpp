#pragma once

#include <memory>
#include <string>
#include <vector>

#include "classmark/tensor.hpp"

namespace classmark::nn {

/// Named handle onto one parameter tensor and its gradient buffer.
/// `is_weight` marks conv/dense weight matrices (the prunable tensors,
/// as opposed to biases).
struct ParamView {
  std::string name;
  std::vector<double>* value;
  std::vector<double>* grad;
  std::vector<int> shape;
  bool is_weight;
};

/// Saved activations for one forward pass. Forward is const on the layers;
/// everything backward needs lives here, so inference calls on a shared
/// model never race.
struct Tape {
  std::vector<std::vector<Tensor>> slots;
  explicit Tape(std::size_t layers) : slots(layers) {}
  void save(int layer, Tensor t) { slots[layer].push_back(std::move(t)); }
  std::vector<Tensor>& at(int layer) { return slots[layer]; }
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Tape* tape, int idx) const = 0;
  virtual Tensor backward(const Tensor& grad, Tape& tape, int idx) = 0;
  virtual void collect_params(const std::string& prefix,
                              std::vector<ParamView>& out) {}
  virtual std::string kind() const = 0;
};

class Conv2d final : public Layer {
 public:
  Conv2d(int in_c, int out_c, int ksize, int stride, int pad, int in_h,
         int in_w);

  Tensor forward(const Tensor& x, Tape* tape, int idx) const override;
  Tensor backward(const Tensor& grad, Tape& tape, int idx) override;
  void collect_params(const std::string& prefix,
                      std::vector<ParamView>& out) override;
  std::string kind() const override { return "conv2d"; }

  int out_h() const { return out_h_; }
  int out_w() const { return out_w_; }
  int out_c() const { return out_c_; }

  std::vector<double> weight;  // [out_c, in_c * k * k]
  std::vector<double> bias;    // [out_c]
  std::vector<double> weight_grad;
  std::vector<double> bias_grad;

 private:
  void im2col(const double* img, double* cols) const;
  void col2im(const double* cols, double* img) const;

  int in_c_, out_c_, k_, stride_, pad_, in_h_, in_w_, out_h_, out_w_;
};

class Dense final : public Layer {
 public:
  Dense(int in_features, int out_features);

  Tensor forward(const Tensor& x, Tape* tape, int idx) const override;
  Tensor backward(const Tensor& grad, Tape& tape, int idx) override;
  void collect_params(const std::string& prefix,
                      std::vector<ParamView>& out) override;
  std::string kind() const override { return "dense"; }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  std::vector<double> weight;  // [out, in]
  std::vector<double> bias;    // [out]
  std::vector<double> weight_grad;
  std::vector<double> bias_grad;

 private:
  int in_, out_;
};

class Relu final : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape* tape, int idx) const override;
  Tensor backward(const Tensor& grad, Tape& tape, int idx) override;
  std::string kind() const override { return "relu"; }
};

class Sigmoid final : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape* tape, int idx) const override;
  Tensor backward(const Tensor& grad, Tape& tape, int idx) override;
  std::string kind() const override { return "sigmoid"; }
};

/// 2x2 max pooling, stride 2, floor semantics on odd extents.
class MaxPool2 final : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape* tape, int idx) const override;
  Tensor backward(const Tensor& grad, Tape& tape, int idx) override;
  std::string kind() const override { return "maxpool2"; }
};

class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape* tape, int idx) const override;
  Tensor backward(const Tensor& grad, Tape& tape, int idx) override;
  std::string kind() const override { return "flatten"; }
};

class UpsampleNearest2 final : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape* tape, int idx) const override;
  Tensor backward(const Tensor& grad, Tape& tape, int idx) override;
  std::string kind() const override { return "upsample2"; }
};

struct Network {
  std::vector<std::unique_ptr<Layer>> layers;

  Tensor forward(const Tensor& x, Tape* tape) const;
  Tensor backward(Tensor loss_grad, Tape& tape);
  std::vector<ParamView> params();
  void zero_grads();
};

}  // namespace classmark::nn
