#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtd/rng.hpp"
#include "vtd/tensor.hpp"

namespace vtd::nn {

enum class Mode { TRAIN, EVAL };

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor(value.shape());
  }
  void zero_grad() { grad.data.setZero(); }
};

// Layers cache forward activations internally, so training (forward then
// backward) is single-threaded by design. infer() never touches layer state
// and is safe to call concurrently; for BatchNorm it always uses running
// statistics.

// y = x W^T + b, x: [N, in]
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int64_t in, int64_t out, Rng& rng, bool bias = true);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;
  void collect(std::vector<Param*>& out);

  Param w;  // [out, in]
  Param b;  // [out]
  bool has_bias = true;

 private:
  Tensor x_;
};

// 3x3-style conv on [N, C, H, W] via im2col + GEMM.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int64_t in_ch, int64_t out_ch, int64_t ksize,
         int64_t stride, int64_t pad, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;
  void collect(std::vector<Param*>& out);

  int64_t out_h(int64_t h) const { return (h + 2 * pad_ - ksize_) / stride_ + 1; }
  int64_t out_w(int64_t w) const { return (w + 2 * pad_ - ksize_) / stride_ + 1; }

  Param w;  // [out_ch, in_ch * k * k]
  Param b;  // [out_ch]

 private:
  Tensor run(const Tensor& x, Tensor* col_out) const;

  int64_t in_ch_ = 0, out_ch_ = 0, ksize_ = 3, stride_ = 1, pad_ = 1;
  Tensor col_;  // cached im2col matrix
  std::vector<int64_t> x_shape_;
};

// Per-feature normalization over the batch dimension, x: [N, F].
// TRAIN normalizes with batch statistics and refreshes the running ones
// (keep-rate momentum: run = momentum * run + (1 - momentum) * batch);
// EVAL and infer() use the running statistics.
class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(const std::string& name, int64_t features, double momentum = 0.9);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;
  void collect(std::vector<Param*>& out);
  void check_running_variance() const;  // throws NonPositiveVariance

  Param gamma, beta;
  Tensor run_mean, run_var;
  double momentum = 0.9;
  double eps = 1e-5;

 private:
  Tensor xhat_, inv_std_;
  Mode cached_mode_ = Mode::TRAIN;
  int64_t cached_n_ = 0;
};

// Row-wise normalization over the last dimension, x: [R, F].
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, int64_t features);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;
  void collect(std::vector<Param*>& out);

  Param gamma, beta;
  double eps = 1e-5;

 private:
  Tensor xhat_, inv_std_;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy) const;
  Tensor infer(const Tensor& x) const;

 private:
  Tensor mask_;
};

Tensor sigmoid(const Tensor& x);

// Nearest-neighbor 2x upsample on [N, C, H, W].
class Upsample2x {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy) const;
  Tensor infer(const Tensor& x) const;

 private:
  std::vector<int64_t> x_shape_;
};

// [N, C, H, W] -> [N, C] spatial mean.
class GlobalAvgPool2d {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy) const;
  Tensor infer(const Tensor& x) const;

 private:
  std::vector<int64_t> x_shape_;
};

// Self-attention over tokens, x: [B, T, D], D split across heads.
class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(const std::string& name, int64_t dim, int64_t heads, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;
  void collect(std::vector<Param*>& out);

  Linear wq, wk, wv, wo;
  int64_t heads = 4;

 private:
  Tensor run(const Tensor& x, bool cache);
  Tensor run_const(const Tensor& x) const;

  Tensor q_, k_, v_, probs_, heads_out_;
  std::vector<int64_t> x_shape_;
};

// Post-norm encoder block: x = LN1(x + attn(x)); x = LN2(x + ff(x)).
class TransformerLayer {
 public:
  TransformerLayer() = default;
  TransformerLayer(const std::string& name, int64_t dim, int64_t heads, int64_t ff_dim,
                   Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;
  void collect(std::vector<Param*>& out);

  MultiHeadSelfAttention attn;
  LayerNorm ln1, ln2;
  Linear ff1, ff2;

 private:
  ReLU ff_relu_;
  std::vector<int64_t> shape_;
};

class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void attach(const std::vector<Param*>& params);
  void step();
  void zero_grad();
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

// shared init helpers
Tensor uniform_init(std::vector<int64_t> shape, double bound, Rng& rng);
Tensor normal_init(std::vector<int64_t> shape, double stddev, Rng& rng);

}  // namespace vtd::nn
