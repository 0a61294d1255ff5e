#include "classmark/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "classmark/errors.hpp"

namespace classmark::nn {

namespace {

constexpr int kPredictBatch = 256;

void check_input_shape(const ArchSpec& arch, const RasterImage& img) {
  if (img.height != arch.input_h || img.width != arch.input_w ||
      img.channels != arch.input_c)
    raise(Errc::ShapeMismatch, "image shape does not match model input");
}

/// [count, c, h, w] tensor of the selected rows, scaled to [0,1].
Tensor batch_tensor(const ArchSpec& arch,
                    const std::vector<RasterImage>& images,
                    const std::size_t* idx, int count) {
  const int c = arch.input_c, h = arch.input_h, w = arch.input_w;
  Tensor t({count, c, h, w});
  for (int b = 0; b < count; ++b) {
    const RasterImage& img = images[idx ? idx[b] : std::size_t(b)];
    check_input_shape(arch, img);
    double* dst = t.data.data() + std::size_t(b) * c * h * w;
    for (int ch = 0; ch < c; ++ch)
      for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col)
          dst[(std::size_t(ch) * h + r) * w + col] =
              img.at(r, col, ch) / 255.0;
  }
  return t;
}

void softmax_rows(Tensor& logits) {
  const int batch = logits.dim(0), n = logits.dim(1);
  for (int b = 0; b < batch; ++b) {
    double* row = logits.data.data() + std::size_t(b) * n;
    const double mx = *std::max_element(row, row + n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += row[i] = std::exp(row[i] - mx);
    for (int i = 0; i < n; ++i) row[i] /= sum;
  }
}

/// Loss value plus its gradient w.r.t. the network output, both averaged
/// over the batch.
double loss_and_grad(LossKind kind, const Tensor& out, const Tensor& input,
                     const std::vector<int>& labels, const std::size_t* idx,
                     int count, Tensor& grad) {
  if (kind == LossKind::CrossEntropy) {
    const int n = out.dim(1);
    Tensor probs = out;
    softmax_rows(probs);
    grad = probs;
    double loss = 0.0;
    for (int b = 0; b < count; ++b) {
      const int y = labels[idx ? idx[b] : std::size_t(b)];
      const double p = probs.data[std::size_t(b) * n + y];
      loss -= std::log(std::max(p, 1e-300));
      grad.data[std::size_t(b) * n + y] -= 1.0;
    }
    for (double& g : grad.data) g /= count;
    return loss / count;
  }

  // Reconstruction MSE against the (normalized) input itself.
  grad = Tensor(out.shape);
  double loss = 0.0;
  const double scale = 1.0 / double(out.numel());
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double d = out.data[i] - input.data[i];
    loss += d * d * scale;
    grad.data[i] = 2.0 * d * scale;
  }
  return loss;
}

class OptimizerState {
 public:
  OptimizerState(const Hyperparams& hp, std::vector<ParamView> params)
      : hp_(hp), params_(std::move(params)) {
    if (hp_.optimizer == Optimizer::Adam) {
      m_.resize(params_.size());
      v_.resize(params_.size());
      for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].value->size(), 0.0);
        v_[i].assign(params_[i].value->size(), 0.0);
      }
    } else {
      vel_.resize(params_.size());
      for (std::size_t i = 0; i < params_.size(); ++i)
        vel_[i].assign(params_[i].value->size(), 0.0);
    }
  }

  void step() {
    ++t_;
    // Decoupled decay: weights shrink toward zero unless gradients hold them
    // up; biases are exempt, matching the pruning attack's notion of "weight".
    const double shrink = 1.0 - hp_.lr * hp_.weight_decay;
    if (hp_.optimizer == Optimizer::Adam) {
      const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double bc1 = 1.0 - std::pow(b1, t_);
      const double bc2 = 1.0 - std::pow(b2, t_);
      for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& val = *params_[i].value;
        auto& grd = *params_[i].grad;
        if (params_[i].is_weight && shrink != 1.0)
          for (auto& w : val) w *= shrink;
        for (std::size_t j = 0; j < val.size(); ++j) {
          m_[i][j] = b1 * m_[i][j] + (1 - b1) * grd[j];
          v_[i][j] = b2 * v_[i][j] + (1 - b2) * grd[j] * grd[j];
          val[j] -= hp_.lr * (m_[i][j] / bc1) /
                    (std::sqrt(v_[i][j] / bc2) + eps);
        }
      }
    } else {
      for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& val = *params_[i].value;
        auto& grd = *params_[i].grad;
        if (params_[i].is_weight && shrink != 1.0)
          for (auto& w : val) w *= shrink;
        for (std::size_t j = 0; j < val.size(); ++j) {
          vel_[i][j] = hp_.momentum * vel_[i][j] - hp_.lr * grd[j];
          val[j] += vel_[i][j];
        }
      }
    }
  }

 private:
  Hyperparams hp_;
  std::vector<ParamView> params_;
  std::vector<std::vector<double>> m_, v_, vel_;
  int t_ = 0;
};

}  // namespace

ModelArtifact train(const ModelArtifact& model, const data::LabeledDataset& data,
                    const Hyperparams& hp, const ProgressFn& progress) {
  if (data.empty()) raise(Errc::EmptyDataset, "cannot train on no samples");
  const bool classifier = model.arch.is_classifier();
  if (classifier)
    for (int y : data.labels)
      if (y < 0 || y >= model.arch.num_classes)
        raise(Errc::LabelOutOfRange,
              "label " + std::to_string(y) + " outside model classes");

  ModelArtifact out = model.clone();
  OptimizerState opt(hp, out.net.params());
  std::mt19937_64 rng(hp.seed);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  const LossKind loss_kind =
      classifier ? LossKind::CrossEntropy : LossKind::ReconstructionMse;

  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += std::size_t(hp.batch_size)) {
      const int count =
          int(std::min<std::size_t>(hp.batch_size, order.size() - start));
      Tensor x = batch_tensor(out.arch, data.images, order.data() + start,
                              count);
      Tape tape(out.net.layers.size());
      Tensor y = out.net.forward(x, &tape);
      Tensor grad;
      loss_sum += loss_and_grad(loss_kind, y, x, data.labels,
                                order.data() + start, count, grad);
      ++batches;
      out.net.zero_grads();
      out.net.backward(std::move(grad), tape);
      opt.step();
    }
    out.trained_epochs += 1;
    if (progress) progress({epoch, loss_sum / batches});
  }
  return out;
}

std::vector<int> predict(const ModelArtifact& model,
                         const std::vector<RasterImage>& images) {
  std::vector<int> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kPredictBatch) {
    const int count =
        int(std::min<std::size_t>(kPredictBatch, images.size() - start));
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), start);
    Tensor x = batch_tensor(model.arch, images, idx.data(), count);
    Tensor y = model.net.forward(x, nullptr);
    const int n = y.dim(1);
    for (int b = 0; b < count; ++b) {
      const double* row = y.data.data() + std::size_t(b) * n;
      int best = 0;
      for (int i = 1; i < n; ++i)
        if (row[i] > row[best]) best = i;  // strict: ties keep lowest index
      out.push_back(best);
    }
  }
  return out;
}

std::vector<std::vector<double>> predict_proba(
    const ModelArtifact& model, const std::vector<RasterImage>& images) {
  std::vector<std::vector<double>> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kPredictBatch) {
    const int count =
        int(std::min<std::size_t>(kPredictBatch, images.size() - start));
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), start);
    Tensor x = batch_tensor(model.arch, images, idx.data(), count);
    Tensor y = model.net.forward(x, nullptr);
    softmax_rows(y);
    const int n = y.dim(1);
    for (int b = 0; b < count; ++b)
      out.emplace_back(y.data.begin() + std::size_t(b) * n,
                       y.data.begin() + std::size_t(b + 1) * n);
  }
  return out;
}

double evaluate(const ModelArtifact& model, const data::LabeledDataset& data) {
  if (data.empty()) raise(Errc::EmptyDataset, "cannot evaluate on no samples");
  const std::vector<int> pred = predict(model, data.images);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == data.labels[i]) ++hits;
  return double(hits) / double(pred.size());
}

std::vector<RasterImage> reconstruct(const ModelArtifact& model,
                                     const std::vector<RasterImage>& images) {
  std::vector<RasterImage> out;
  out.reserve(images.size());
  const int c = model.arch.input_c, h = model.arch.input_h,
            w = model.arch.input_w;
  for (std::size_t start = 0; start < images.size(); start += kPredictBatch) {
    const int count =
        int(std::min<std::size_t>(kPredictBatch, images.size() - start));
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), start);
    Tensor x = batch_tensor(model.arch, images, idx.data(), count);
    Tensor y = model.net.forward(x, nullptr);
    for (int b = 0; b < count; ++b) {
      RasterImage img;
      img.height = h;
      img.width = w;
      img.channels = c;
      img.pixels.resize(std::size_t(h) * w * c);
      const double* src = y.data.data() + std::size_t(b) * c * h * w;
      for (int ch = 0; ch < c; ++ch)
        for (int r = 0; r < h; ++r)
          for (int col = 0; col < w; ++col) {
            const double v =
                std::round(src[(std::size_t(ch) * h + r) * w + col] * 255.0);
            img.at(r, col, ch) =
                std::uint8_t(std::clamp(v, 0.0, 255.0));
          }
      out.push_back(std::move(img));
    }
  }
  return out;
}

double gradient_check(const ModelArtifact& model,
                      const data::LabeledDataset& batch, int param_count,
                      std::uint64_t seed) {
  if (batch.empty()) raise(Errc::EmptyDataset, "gradient check needs samples");
  ModelArtifact work = model.clone();
  const bool classifier = work.arch.is_classifier();
  const LossKind loss_kind =
      classifier ? LossKind::CrossEntropy : LossKind::ReconstructionMse;
  const int count = int(batch.size());

  auto loss_of = [&]() {
    Tensor x = batch_tensor(work.arch, batch.images, nullptr, count);
    Tensor y = work.net.forward(x, nullptr);
    Tensor unused;
    return loss_and_grad(loss_kind, y, x, batch.labels, nullptr, count,
                         unused);
  };

  // Analytic pass.
  {
    Tensor x = batch_tensor(work.arch, batch.images, nullptr, count);
    Tape tape(work.net.layers.size());
    Tensor y = work.net.forward(x, &tape);
    Tensor grad;
    loss_and_grad(loss_kind, y, x, batch.labels, nullptr, count, grad);
    work.net.zero_grads();
    work.net.backward(std::move(grad), tape);
  }

  auto params = work.net.params();
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t j = 0; j < params[i].value->size(); ++j)
      coords.emplace_back(i, j);
  std::mt19937_64 rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  if (int(coords.size()) > param_count) coords.resize(param_count);

  const double eps = 1e-5;
  double worst = 0.0;
  for (auto [i, j] : coords) {
    double& p = (*params[i].value)[j];
    const double analytic = (*params[i].grad)[j];
    const double orig = p;
    p = orig + eps;
    const double hi = loss_of();
    p = orig - eps;
    const double lo = loss_of();
    p = orig;
    const double numeric = (hi - lo) / (2 * eps);
    const double rel = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace classmark::nn
