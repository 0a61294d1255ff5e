#include "classmark/layers.hpp"

#include <algorithm>
#include <cmath>

#include "classmark/errors.hpp"
#include "classmark/gemm.hpp"

namespace classmark::nn {

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_c, int out_c, int ksize, int stride, int pad, int in_h,
               int in_w)
    : in_c_(in_c), out_c_(out_c), k_(ksize), stride_(stride), pad_(pad),
      in_h_(in_h), in_w_(in_w) {
  out_h_ = (in_h + 2 * pad - ksize) / stride + 1;
  out_w_ = (in_w + 2 * pad - ksize) / stride + 1;
  if (out_h_ <= 0 || out_w_ <= 0)
    raise(Errc::UnsupportedShape, "conv output collapses to zero extent");
  weight.assign(std::size_t(out_c) * in_c * ksize * ksize, 0.0);
  bias.assign(out_c, 0.0);
  weight_grad.assign(weight.size(), 0.0);
  bias_grad.assign(bias.size(), 0.0);
}

void Conv2d::im2col(const double* img, double* cols) const {
  // cols is [in_c*k*k, out_h*out_w] for one sample.
  const int ohw = out_h_ * out_w_;
  for (int ic = 0; ic < in_c_; ++ic)
    for (int ky = 0; ky < k_; ++ky)
      for (int kx = 0; kx < k_; ++kx) {
        double* row = cols + (std::size_t(ic) * k_ * k_ + ky * k_ + kx) * ohw;
        for (int oy = 0; oy < out_h_; ++oy) {
          const int iy = oy * stride_ + ky - pad_;
          for (int ox = 0; ox < out_w_; ++ox) {
            const int ix = ox * stride_ + kx - pad_;
            row[oy * out_w_ + ox] =
                (iy >= 0 && iy < in_h_ && ix >= 0 && ix < in_w_)
                    ? img[(std::size_t(ic) * in_h_ + iy) * in_w_ + ix]
                    : 0.0;
          }
        }
      }
}

void Conv2d::col2im(const double* cols, double* img) const {
  const int ohw = out_h_ * out_w_;
  for (int ic = 0; ic < in_c_; ++ic)
    for (int ky = 0; ky < k_; ++ky)
      for (int kx = 0; kx < k_; ++kx) {
        const double* row =
            cols + (std::size_t(ic) * k_ * k_ + ky * k_ + kx) * ohw;
        for (int oy = 0; oy < out_h_; ++oy) {
          const int iy = oy * stride_ + ky - pad_;
          if (iy < 0 || iy >= in_h_) continue;
          for (int ox = 0; ox < out_w_; ++ox) {
            const int ix = ox * stride_ + kx - pad_;
            if (ix < 0 || ix >= in_w_) continue;
            img[(std::size_t(ic) * in_h_ + iy) * in_w_ + ix] +=
                row[oy * out_w_ + ox];
          }
        }
      }
}

Tensor Conv2d::forward(const Tensor& x, Tape* tape, int idx) const {
  const int batch = x.dim(0);
  const int ohw = out_h_ * out_w_;
  const int kdim = in_c_ * k_ * k_;

  Tensor cols({kdim, batch * ohw});
  for (int b = 0; b < batch; ++b) {
    // Per-sample blocks sit side by side along the column axis; row stride
    // over the whole buffer keeps one GEMM per batch.
    std::vector<double> sample(std::size_t(kdim) * ohw);
    im2col(x.data.data() + std::size_t(b) * in_c_ * in_h_ * in_w_,
           sample.data());
    for (int r = 0; r < kdim; ++r)
      std::copy_n(sample.data() + std::size_t(r) * ohw, ohw,
                  cols.data.data() + (std::size_t(r) * batch + b) * ohw);
  }

  Tensor flat({out_c_, batch * ohw});
  dgemm(false, false, out_c_, batch * ohw, kdim, 1.0, weight.data(), kdim,
        cols.data.data(), batch * ohw, 0.0, flat.data.data(), batch * ohw);

  Tensor y({batch, out_c_, out_h_, out_w_});
  for (int b = 0; b < batch; ++b)
    for (int oc = 0; oc < out_c_; ++oc) {
      const double* src = flat.data.data() + (std::size_t(oc) * batch + b) * ohw;
      double* dst =
          y.data.data() + (std::size_t(b) * out_c_ + oc) * ohw;
      const double bv = bias[oc];
      for (int i = 0; i < ohw; ++i) dst[i] = src[i] + bv;
    }

  if (tape) tape->save(idx, std::move(cols));
  return y;
}

Tensor Conv2d::backward(const Tensor& grad, Tape& tape, int idx) {
  const Tensor& cols = tape.at(idx).back();
  const int batch = grad.dim(0);
  const int ohw = out_h_ * out_w_;
  const int kdim = in_c_ * k_ * k_;

  Tensor grad_flat({out_c_, batch * ohw});
  for (int b = 0; b < batch; ++b)
    for (int oc = 0; oc < out_c_; ++oc) {
      const double* src =
          grad.data.data() + (std::size_t(b) * out_c_ + oc) * ohw;
      double* dst =
          grad_flat.data.data() + (std::size_t(oc) * batch + b) * ohw;
      std::copy_n(src, ohw, dst);
      double acc = 0.0;
      for (int i = 0; i < ohw; ++i) acc += src[i];
      bias_grad[oc] += acc;
    }

  // dW += dY * colsT
  dgemm(false, true, out_c_, kdim, batch * ohw, 1.0, grad_flat.data.data(),
        batch * ohw, cols.data.data(), batch * ohw, 1.0, weight_grad.data(),
        kdim);

  // dcols = WT * dY
  Tensor dcols({kdim, batch * ohw});
  dgemm(true, false, kdim, batch * ohw, out_c_, 1.0, weight.data(), kdim,
        grad_flat.data.data(), batch * ohw, 0.0, dcols.data.data(),
        batch * ohw);

  Tensor dx({batch, in_c_, in_h_, in_w_});
  std::vector<double> sample(std::size_t(kdim) * ohw);
  for (int b = 0; b < batch; ++b) {
    for (int r = 0; r < kdim; ++r)
      std::copy_n(dcols.data.data() + (std::size_t(r) * batch + b) * ohw, ohw,
                  sample.data() + std::size_t(r) * ohw);
    col2im(sample.data(),
           dx.data.data() + std::size_t(b) * in_c_ * in_h_ * in_w_);
  }
  tape.at(idx).pop_back();
  return dx;
}

void Conv2d::collect_params(const std::string& prefix,
                            std::vector<ParamView>& out) {
  out.push_back({prefix + ".weight", &weight, &weight_grad,
                 {out_c_, in_c_, k_, k_}, true});
  out.push_back({prefix + ".bias", &bias, &bias_grad, {out_c_}, false});
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Dense::Dense(int in_features, int out_features)
    : in_(in_features), out_(out_features) {
  weight.assign(std::size_t(out_) * in_, 0.0);
  bias.assign(out_, 0.0);
  weight_grad.assign(weight.size(), 0.0);
  bias_grad.assign(bias.size(), 0.0);
}

Tensor Dense::forward(const Tensor& x, Tape* tape, int idx) const {
  const int batch = x.dim(0);
  Tensor y({batch, out_});
  dgemm(false, true, batch, out_, in_, 1.0, x.data.data(), in_, weight.data(),
        in_, 0.0, y.data.data(), out_);
  for (int b = 0; b < batch; ++b)
    for (int o = 0; o < out_; ++o) y.data[std::size_t(b) * out_ + o] += bias[o];
  if (tape) tape->save(idx, x);
  return y;
}

Tensor Dense::backward(const Tensor& grad, Tape& tape, int idx) {
  const Tensor& x = tape.at(idx).back();
  const int batch = grad.dim(0);

  dgemm(true, false, out_, in_, batch, 1.0, grad.data.data(), out_,
        x.data.data(), in_, 1.0, weight_grad.data(), in_);
  for (int b = 0; b < batch; ++b)
    for (int o = 0; o < out_; ++o)
      bias_grad[o] += grad.data[std::size_t(b) * out_ + o];

  Tensor dx({batch, in_});
  dgemm(false, false, batch, in_, out_, 1.0, grad.data.data(), out_,
        weight.data(), in_, 0.0, dx.data.data(), in_);
  tape.at(idx).pop_back();
  return dx;
}

void Dense::collect_params(const std::string& prefix,
                           std::vector<ParamView>& out) {
  out.push_back({prefix + ".weight", &weight, &weight_grad, {out_, in_}, true});
  out.push_back({prefix + ".bias", &bias, &bias_grad, {out_}, false});
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

Tensor Relu::forward(const Tensor& x, Tape* tape, int idx) const {
  Tensor y = x;
  for (double& v : y.data) v = v > 0 ? v : 0.0;
  if (tape) tape->save(idx, y);
  return y;
}

Tensor Relu::backward(const Tensor& grad, Tape& tape, int idx) {
  const Tensor& y = tape.at(idx).back();
  Tensor dx = grad;
  for (std::size_t i = 0; i < dx.data.size(); ++i)
    if (y.data[i] <= 0) dx.data[i] = 0.0;
  tape.at(idx).pop_back();
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, Tape* tape, int idx) const {
  Tensor y = x;
  for (double& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
  if (tape) tape->save(idx, y);
  return y;
}

Tensor Sigmoid::backward(const Tensor& grad, Tape& tape, int idx) {
  const Tensor& y = tape.at(idx).back();
  Tensor dx = grad;
  for (std::size_t i = 0; i < dx.data.size(); ++i)
    dx.data[i] *= y.data[i] * (1.0 - y.data[i]);
  tape.at(idx).pop_back();
  return dx;
}

// ---------------------------------------------------------------------------
// MaxPool2
// ---------------------------------------------------------------------------

Tensor MaxPool2::forward(const Tensor& x, Tape* tape, int idx) const {
  const int batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = h / 2, ow = w / 2;
  Tensor y({batch, ch, oh, ow});
  Tensor argmax({batch, ch, oh, ow});
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < ch; ++c) {
      const double* plane = x.data.data() + (std::size_t(b) * ch + c) * h * w;
      double* out = y.data.data() + (std::size_t(b) * ch + c) * oh * ow;
      double* arg = argmax.data.data() + (std::size_t(b) * ch + c) * oh * ow;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          int best = (2 * oy) * w + 2 * ox;
          double bv = plane[best];
          const int cands[3] = {(2 * oy) * w + 2 * ox + 1,
                                (2 * oy + 1) * w + 2 * ox,
                                (2 * oy + 1) * w + 2 * ox + 1};
          for (int cand : cands)
            if (plane[cand] > bv) {
              bv = plane[cand];
              best = cand;
            }
          out[oy * ow + ox] = bv;
          arg[oy * ow + ox] = double(best);
        }
    }
  if (tape) {
    Tensor inshape({batch, ch, h, w});  // only the shape is needed
    inshape.data.clear();
    tape->save(idx, std::move(inshape));
    tape->save(idx, std::move(argmax));
  }
  return y;
}

Tensor MaxPool2::backward(const Tensor& grad, Tape& tape, int idx) {
  Tensor argmax = std::move(tape.at(idx).back());
  tape.at(idx).pop_back();
  Tensor inshape = std::move(tape.at(idx).back());
  tape.at(idx).pop_back();

  const int batch = grad.dim(0), ch = grad.dim(1);
  const int oh = grad.dim(2), ow = grad.dim(3);
  const int h = inshape.dim(2), w = inshape.dim(3);
  Tensor dx({batch, ch, h, w});
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < ch; ++c) {
      const double* g = grad.data.data() + (std::size_t(b) * ch + c) * oh * ow;
      const double* arg =
          argmax.data.data() + (std::size_t(b) * ch + c) * oh * ow;
      double* out = dx.data.data() + (std::size_t(b) * ch + c) * h * w;
      for (int i = 0; i < oh * ow; ++i) out[int(arg[i])] += g[i];
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Shape utilities
// ---------------------------------------------------------------------------

Tensor Flatten::forward(const Tensor& x, Tape* tape, int idx) const {
  const int batch = x.dim(0);
  const int features = int(x.numel()) / batch;
  Tensor y = x.reshaped({batch, features});
  if (tape) {
    Tensor shape_memo(std::vector<int>{});
    shape_memo.shape = x.shape;
    tape->save(idx, std::move(shape_memo));
  }
  return y;
}

Tensor Flatten::backward(const Tensor& grad, Tape& tape, int idx) {
  Tensor memo = std::move(tape.at(idx).back());
  tape.at(idx).pop_back();
  return grad.reshaped(memo.shape);
}

Tensor UpsampleNearest2::forward(const Tensor& x, Tape*, int) const {
  const int batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y({batch, ch, h * 2, w * 2});
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < ch; ++c) {
      const double* src = x.data.data() + (std::size_t(b) * ch + c) * h * w;
      double* dst = y.data.data() + (std::size_t(b) * ch + c) * 4 * h * w;
      for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col) {
          const double v = src[r * w + col];
          const int r2 = 2 * r, c2 = 2 * col, ow = 2 * w;
          dst[r2 * ow + c2] = v;
          dst[r2 * ow + c2 + 1] = v;
          dst[(r2 + 1) * ow + c2] = v;
          dst[(r2 + 1) * ow + c2 + 1] = v;
        }
    }
  return y;
}

Tensor UpsampleNearest2::backward(const Tensor& grad, Tape&, int) {
  const int batch = grad.dim(0), ch = grad.dim(1);
  const int oh = grad.dim(2), ow = grad.dim(3);
  const int h = oh / 2, w = ow / 2;
  Tensor dx({batch, ch, h, w});
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < ch; ++c) {
      const double* g = grad.data.data() + (std::size_t(b) * ch + c) * oh * ow;
      double* dst = dx.data.data() + (std::size_t(b) * ch + c) * h * w;
      for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col)
          dst[r * w + col] = g[2 * r * ow + 2 * col] +
                             g[2 * r * ow + 2 * col + 1] +
                             g[(2 * r + 1) * ow + 2 * col] +
                             g[(2 * r + 1) * ow + 2 * col + 1];
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

Tensor Network::forward(const Tensor& x, Tape* tape) const {
  Tensor cur = x;
  for (std::size_t i = 0; i < layers.size(); ++i)
    cur = layers[i]->forward(cur, tape, int(i));
  return cur;
}

Tensor Network::backward(Tensor loss_grad, Tape& tape) {
  Tensor cur = std::move(loss_grad);
  for (std::size_t i = layers.size(); i-- > 0;)
    cur = layers[i]->backward(cur, tape, int(i));
  return cur;
}

std::vector<ParamView> Network::params() {
  std::vector<ParamView> out;
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i]->collect_params("layer" + std::to_string(i), out);
  return out;
}

void Network::zero_grads() {
  for (auto& p : params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

}  // namespace classmark::nn
