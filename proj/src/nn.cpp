#include "vtd/nn.hpp"

#include <cmath>

#include "vtd/errors.hpp"

namespace vtd::nn {

Tensor uniform_init(std::vector<int64_t> shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t.data[i] = rng.uniform(-bound, bound);
  return t;
}

Tensor normal_init(std::vector<int64_t> shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t.data[i] = rng.normal(0.0, stddev);
  return t;
}

// ---- Linear -----------------------------------------------------------------

Linear::Linear(const std::string& name, int64_t in, int64_t out, Rng& rng, bool bias)
    : has_bias(bias) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  w = Param(name + ".w", uniform_init({out, in}, bound, rng));
  b = Param(name + ".b", bias ? uniform_init({out}, bound, rng) : Tensor({out}));
}

Tensor Linear::infer(const Tensor& x) const {
  const int64_t n = x.numel() / w.value.dim(1);
  Tensor y({n, w.value.dim(0)});
  y.mat().noalias() = x.as_mat(n, w.value.dim(1)) * w.value.mat().transpose();
  if (has_bias)
    y.mat().rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.value.data.data(), b.value.numel());
  return y;
}

Tensor Linear::forward(const Tensor& x) {
  x_ = x;
  return infer(x);
}

Tensor Linear::backward(const Tensor& gy) {
  const int64_t in = w.value.dim(1), out = w.value.dim(0);
  const int64_t n = gy.numel() / out;
  auto gym = gy.as_mat(n, out);
  auto xm = x_.as_mat(n, in);
  w.grad.mat().noalias() += gym.transpose() * xm;
  if (has_bias)
    Eigen::Map<Eigen::RowVectorXd>(b.grad.data.data(), out) += gym.colwise().sum();
  Tensor gx(x_.shape());
  gx.as_mat(n, in).noalias() = gym * w.value.mat();
  return gx;
}

void Linear::collect(std::vector<Param*>& out) {
  out.push_back(&w);
  if (has_bias) out.push_back(&b);
}

// ---- Conv2d -----------------------------------------------------------------

Conv2d::Conv2d(const std::string& name, int64_t in_ch, int64_t out_ch, int64_t ksize,
               int64_t stride, int64_t pad, Rng& rng)
    : in_ch_(in_ch), out_ch_(out_ch), ksize_(ksize), stride_(stride), pad_(pad) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in_ch * ksize * ksize));
  w = Param(name + ".w", uniform_init({out_ch, in_ch * ksize * ksize}, bound, rng));
  b = Param(name + ".b", uniform_init({out_ch}, bound, rng));
}

Tensor Conv2d::run(const Tensor& x, Tensor* col_out) const {
  if (x.ndim() != 4 || x.dim(1) != in_ch_)
    throw ShapeMismatch("conv input must be [N, " + std::to_string(in_ch_) + ", H, W]");
  const int64_t n = x.dim(0), h = x.dim(2), wd = x.dim(3);
  const int64_t oh = out_h(h), ow = out_w(wd);
  const int64_t k = ksize_, patch = in_ch_ * k * k;

  Tensor col({n * oh * ow, patch});
  const double* xt = x.data.data();
  double* ct = col.data.data();
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        double* row = ct + ((ni * oh + oy) * ow + ox) * patch;
        for (int64_t ci = 0; ci < in_ch_; ++ci) {
          const double* plane = xt + (ni * in_ch_ + ci) * h * wd;
          for (int64_t ky = 0; ky < k; ++ky) {
            const int64_t iy = oy * stride_ - pad_ + ky;
            double* dst = row + (ci * k + ky) * k;
            if (iy < 0 || iy >= h) {
              for (int64_t kx = 0; kx < k; ++kx) dst[kx] = 0.0;
              continue;
            }
            for (int64_t kx = 0; kx < k; ++kx) {
              const int64_t ix = ox * stride_ - pad_ + kx;
              dst[kx] = (ix < 0 || ix >= wd) ? 0.0 : plane[iy * wd + ix];
            }
          }
        }
      }
    }
  }

  Tensor ymat({n * oh * ow, out_ch_});
  ymat.mat().noalias() = col.mat() * w.value.mat().transpose();
  ymat.mat().rowwise() +=
      Eigen::Map<const Eigen::RowVectorXd>(b.value.data.data(), out_ch_);

  Tensor y({n, out_ch_, oh, ow});
  double* yt = y.data.data();
  const double* ymt = ymat.data.data();
  for (int64_t ni = 0; ni < n; ++ni)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox) {
        const double* src = ymt + ((ni * oh + oy) * ow + ox) * out_ch_;
        for (int64_t co = 0; co < out_ch_; ++co)
          yt[((ni * out_ch_ + co) * oh + oy) * ow + ox] = src[co];
      }

  if (col_out) *col_out = std::move(col);
  return y;
}

Tensor Conv2d::infer(const Tensor& x) const { return run(x, nullptr); }

Tensor Conv2d::forward(const Tensor& x) {
  x_shape_ = x.shape();
  return run(x, &col_);
}

Tensor Conv2d::backward(const Tensor& gy) {
  const int64_t n = gy.dim(0), oh = gy.dim(2), ow = gy.dim(3);
  const int64_t k = ksize_, patch = in_ch_ * k * k;
  const int64_t h = x_shape_[2], wd = x_shape_[3];

  Tensor gym({n * oh * ow, out_ch_});
  {
    const double* gt = gy.data.data();
    double* gmt = gym.data.data();
    for (int64_t ni = 0; ni < n; ++ni)
      for (int64_t co = 0; co < out_ch_; ++co) {
        const double* plane = gt + (ni * out_ch_ + co) * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy)
          for (int64_t ox = 0; ox < ow; ++ox)
            gmt[((ni * oh + oy) * ow + ox) * out_ch_ + co] = plane[oy * ow + ox];
      }
  }

  w.grad.mat().noalias() += gym.mat().transpose() * col_.mat();
  Eigen::Map<Eigen::RowVectorXd>(b.grad.data.data(), out_ch_) += gym.mat().colwise().sum();

  Tensor gcol({n * oh * ow, patch});
  gcol.mat().noalias() = gym.mat() * w.value.mat();

  Tensor gx(x_shape_);
  double* gxt = gx.data.data();
  const double* gct = gcol.data.data();
  for (int64_t ni = 0; ni < n; ++ni)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox) {
        const double* row = gct + ((ni * oh + oy) * ow + ox) * patch;
        for (int64_t ci = 0; ci < in_ch_; ++ci) {
          double* plane = gxt + (ni * in_ch_ + ci) * h * wd;
          for (int64_t ky = 0; ky < k; ++ky) {
            const int64_t iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            const double* src = row + (ci * k + ky) * k;
            for (int64_t kx = 0; kx < k; ++kx) {
              const int64_t ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < wd) plane[iy * wd + ix] += src[kx];
            }
          }
        }
      }
  return gx;
}

void Conv2d::collect(std::vector<Param*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

// ---- BatchNorm1d ------------------------------------------------------------

BatchNorm1d::BatchNorm1d(const std::string& name, int64_t features, double m)
    : momentum(m) {
  gamma = Param(name + ".gamma", Tensor::full({features}, 1.0));
  beta = Param(name + ".beta", Tensor({features}));
  run_mean = Tensor({features});
  run_var = Tensor::full({features}, 1.0);
}

void BatchNorm1d::check_running_variance() const {
  if ((run_var.data <= 0.0).any())
    throw NonPositiveVariance("running variance must stay strictly positive");
}

Tensor BatchNorm1d::infer(const Tensor& x) const {
  const int64_t f = gamma.value.numel();
  const int64_t n = x.numel() / f;
  Tensor y({n, f});
  auto xm = x.as_mat(n, f);
  for (int64_t j = 0; j < f; ++j) {
    const double inv = 1.0 / std::sqrt(run_var.data[j] + eps);
    for (int64_t i = 0; i < n; ++i) {
      // association matches the TRAIN-path EVAL branch bit for bit
      const double xh = (xm(i, j) - run_mean.data[j]) * inv;
      y.at(i, j) = gamma.value.data[j] * xh + beta.value.data[j];
    }
  }
  return y;
}

Tensor BatchNorm1d::forward(const Tensor& x, Mode mode) {
  const int64_t f = gamma.value.numel();
  const int64_t n = x.numel() / f;
  cached_mode_ = mode;
  cached_n_ = n;
  auto xm = x.as_mat(n, f);

  Tensor mean({f}), var({f});
  if (mode == Mode::TRAIN) {
    for (int64_t j = 0; j < f; ++j) {
      double mu = 0.0;
      for (int64_t i = 0; i < n; ++i) mu += xm(i, j);
      mu /= static_cast<double>(n);
      double v = 0.0;
      for (int64_t i = 0; i < n; ++i) v += (xm(i, j) - mu) * (xm(i, j) - mu);
      v /= static_cast<double>(n);  // population statistics, also for running
      mean.data[j] = mu;
      var.data[j] = v;
      run_mean.data[j] = momentum * run_mean.data[j] + (1.0 - momentum) * mu;
      run_var.data[j] = momentum * run_var.data[j] + (1.0 - momentum) * v;
    }
  } else {
    mean = run_mean;
    var = run_var;
  }

  xhat_ = Tensor({n, f});
  inv_std_ = Tensor({f});
  Tensor y({n, f});
  for (int64_t j = 0; j < f; ++j) {
    const double inv = 1.0 / std::sqrt(var.data[j] + eps);
    inv_std_.data[j] = inv;
    for (int64_t i = 0; i < n; ++i) {
      const double xh = (xm(i, j) - mean.data[j]) * inv;
      xhat_.at(i, j) = xh;
      y.at(i, j) = gamma.value.data[j] * xh + beta.value.data[j];
    }
  }
  return y;
}

Tensor BatchNorm1d::backward(const Tensor& gy) {
  const int64_t f = gamma.value.numel();
  const int64_t n = cached_n_;
  auto gym = gy.as_mat(n, f);
  Tensor gx({n, f});

  for (int64_t j = 0; j < f; ++j) {
    double sum_gy = 0.0, sum_gy_xhat = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      sum_gy += gym(i, j);
      sum_gy_xhat += gym(i, j) * xhat_.at(i, j);
    }
    gamma.grad.data[j] += sum_gy_xhat;
    beta.grad.data[j] += sum_gy;

    const double g = gamma.value.data[j];
    const double inv = inv_std_.data[j];
    if (cached_mode_ == Mode::TRAIN) {
      const double nn = static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i)
        gx.at(i, j) = g * inv / nn *
                      (nn * gym(i, j) - sum_gy - xhat_.at(i, j) * sum_gy_xhat);
    } else {
      // running statistics are constants; only the affine path remains
      for (int64_t i = 0; i < n; ++i) gx.at(i, j) = g * inv * gym(i, j);
    }
  }
  return gx;
}

void BatchNorm1d::collect(std::vector<Param*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

// ---- LayerNorm ----------------------------------------------------------------

LayerNorm::LayerNorm(const std::string& name, int64_t features) {
  gamma = Param(name + ".gamma", Tensor::full({features}, 1.0));
  beta = Param(name + ".beta", Tensor({features}));
}

Tensor LayerNorm::infer(const Tensor& x) const {
  const int64_t f = gamma.value.numel();
  const int64_t rows = x.numel() / f;
  Tensor y(x.shape());
  auto xm = x.as_mat(rows, f);
  auto ym = y.as_mat(rows, f);
  for (int64_t i = 0; i < rows; ++i) {
    const double mu = xm.row(i).mean();
    const double var = (xm.row(i).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int64_t j = 0; j < f; ++j)
      ym(i, j) = gamma.value.data[j] * (xm(i, j) - mu) * inv + beta.value.data[j];
  }
  return y;
}

Tensor LayerNorm::forward(const Tensor& x) {
  const int64_t f = gamma.value.numel();
  const int64_t rows = x.numel() / f;
  xhat_ = Tensor({rows, f});
  inv_std_ = Tensor({rows});
  Tensor y(x.shape());
  auto xm = x.as_mat(rows, f);
  auto ym = y.as_mat(rows, f);
  for (int64_t i = 0; i < rows; ++i) {
    const double mu = xm.row(i).mean();
    const double var = (xm.row(i).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std_.data[i] = inv;
    for (int64_t j = 0; j < f; ++j) {
      const double xh = (xm(i, j) - mu) * inv;
      xhat_.at(i, j) = xh;
      ym(i, j) = gamma.value.data[j] * xh + beta.value.data[j];
    }
  }
  return y;
}

Tensor LayerNorm::backward(const Tensor& gy) {
  const int64_t f = gamma.value.numel();
  const int64_t rows = gy.numel() / f;
  auto gym = gy.as_mat(rows, f);
  Tensor gx(gy.shape());
  auto gxm = gx.as_mat(rows, f);

  for (int64_t i = 0; i < rows; ++i) {
    double sum_g = 0.0, sum_g_xhat = 0.0;
    for (int64_t j = 0; j < f; ++j) {
      const double gh = gym(i, j) * gamma.value.data[j];
      sum_g += gh;
      sum_g_xhat += gh * xhat_.at(i, j);
    }
    const double inv = inv_std_.data[i];
    const double ff = static_cast<double>(f);
    for (int64_t j = 0; j < f; ++j) {
      const double gh = gym(i, j) * gamma.value.data[j];
      gxm(i, j) = inv / ff * (ff * gh - sum_g - xhat_.at(i, j) * sum_g_xhat);
      gamma.grad.data[j] += gym(i, j) * xhat_.at(i, j);
      beta.grad.data[j] += gym(i, j);
    }
  }
  return gx;
}

void LayerNorm::collect(std::vector<Param*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

// ---- simple layers ------------------------------------------------------------

Tensor ReLU::infer(const Tensor& x) const {
  Tensor y = x;
  y.data = y.data.max(0.0);
  return y;
}

Tensor ReLU::forward(const Tensor& x) {
  mask_ = Tensor(x.shape());
  mask_.data = (x.data > 0.0).cast<double>();
  Tensor y = x;
  y.data = y.data.max(0.0);
  return y;
}

Tensor ReLU::backward(const Tensor& gy) const {
  Tensor gx = gy;
  gx.data *= mask_.data;
  return gx;
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  y.data = 1.0 / (1.0 + (-y.data).exp());
  return y;
}

Tensor Upsample2x::infer(const Tensor& x) const {
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y({n, c, h * 2, w * 2});
  for (int64_t p = 0; p < n * c; ++p) {
    const double* src = x.data.data() + p * h * w;
    double* dst = y.data.data() + p * h * w * 4;
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) {
        const double v = src[i * w + j];
        dst[(2 * i) * 2 * w + 2 * j] = v;
        dst[(2 * i) * 2 * w + 2 * j + 1] = v;
        dst[(2 * i + 1) * 2 * w + 2 * j] = v;
        dst[(2 * i + 1) * 2 * w + 2 * j + 1] = v;
      }
  }
  return y;
}

Tensor Upsample2x::forward(const Tensor& x) {
  x_shape_ = x.shape();
  return infer(x);
}

Tensor Upsample2x::backward(const Tensor& gy) const {
  const int64_t n = x_shape_[0], c = x_shape_[1], h = x_shape_[2], w = x_shape_[3];
  Tensor gx(x_shape_);
  for (int64_t p = 0; p < n * c; ++p) {
    const double* src = gy.data.data() + p * h * w * 4;
    double* dst = gx.data.data() + p * h * w;
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j)
        dst[i * w + j] = src[(2 * i) * 2 * w + 2 * j] + src[(2 * i) * 2 * w + 2 * j + 1] +
                         src[(2 * i + 1) * 2 * w + 2 * j] +
                         src[(2 * i + 1) * 2 * w + 2 * j + 1];
  }
  return gx;
}

Tensor GlobalAvgPool2d::infer(const Tensor& x) const {
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor y({n, c});
  for (int64_t i = 0; i < n * c; ++i) {
    const double* src = x.data.data() + i * hw;
    double s = 0.0;
    for (int64_t k = 0; k < hw; ++k) s += src[k];
    y.data[i] = s / static_cast<double>(hw);
  }
  return y;
}

Tensor GlobalAvgPool2d::forward(const Tensor& x) {
  x_shape_ = x.shape();
  return infer(x);
}

Tensor GlobalAvgPool2d::backward(const Tensor& gy) const {
  const int64_t hw = x_shape_[2] * x_shape_[3];
  Tensor gx(x_shape_);
  for (int64_t i = 0; i < gy.numel(); ++i) {
    double* dst = gx.data.data() + i * hw;
    const double g = gy.data[i] / static_cast<double>(hw);
    for (int64_t k = 0; k < hw; ++k) dst[k] = g;
  }
  return gx;
}

// ---- MultiHeadSelfAttention -----------------------------------------------------

MultiHeadSelfAttention::MultiHeadSelfAttention(const std::string& name, int64_t dim,
                                               int64_t heads_n, Rng& rng)
    : wq(name + ".wq", dim, dim, rng),
      wk(name + ".wk", dim, dim, rng),
      wv(name + ".wv", dim, dim, rng),
      wo(name + ".wo", dim, dim, rng),
      heads(heads_n) {
  if (dim % heads_n != 0) throw ShapeMismatch("attention dim must divide heads");
}

namespace {

// rows of dst[t0..t0+t) x cols [c0..c0+dh) as a matrix view
inline Eigen::Block<MatMap> head_block(MatMap m, int64_t t0, int64_t c0, int64_t t, int64_t dh) {
  return m.block(t0, c0, t, dh);
}

}  // namespace

Tensor MultiHeadSelfAttention::run_const(const Tensor& x) const {
  const int64_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  const int64_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = wq.infer(x), k = wk.infer(x), v = wv.infer(x);
  Tensor ho({b * t, d});
  auto qm = q.as_mat(b * t, d), km = k.as_mat(b * t, d), vm = v.as_mat(b * t, d);
  auto hom = ho.as_mat(b * t, d);
  for (int64_t bi = 0; bi < b; ++bi) {
    for (int64_t m = 0; m < heads; ++m) {
      const auto qb = qm.block(bi * t, m * dh, t, dh);
      const auto kb = km.block(bi * t, m * dh, t, dh);
      const auto vb = vm.block(bi * t, m * dh, t, dh);
      Eigen::MatrixXd s = (qb * kb.transpose()) * scale;
      for (int64_t i = 0; i < t; ++i) {
        const double mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp();
        s.row(i) /= s.row(i).sum();
      }
      hom.block(bi * t, m * dh, t, dh).noalias() = s * vb;
    }
  }
  Tensor out = wo.infer(ho);
  return out.reshaped({b, t, d});
}

Tensor MultiHeadSelfAttention::infer(const Tensor& x) const { return run_const(x); }

Tensor MultiHeadSelfAttention::forward(const Tensor& x) {
  x_shape_ = x.shape();
  const int64_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  const int64_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  q_ = wq.forward(x);
  k_ = wk.forward(x);
  v_ = wv.forward(x);
  probs_ = Tensor({b, heads, t, t});
  heads_out_ = Tensor({b * t, d});

  auto qm = q_.as_mat(b * t, d), km = k_.as_mat(b * t, d), vm = v_.as_mat(b * t, d);
  auto hom = heads_out_.as_mat(b * t, d);
  for (int64_t bi = 0; bi < b; ++bi) {
    for (int64_t m = 0; m < heads; ++m) {
      const auto qb = qm.block(bi * t, m * dh, t, dh);
      const auto kb = km.block(bi * t, m * dh, t, dh);
      const auto vb = vm.block(bi * t, m * dh, t, dh);
      Eigen::MatrixXd s = (qb * kb.transpose()) * scale;
      for (int64_t i = 0; i < t; ++i) {
        const double mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp();
        s.row(i) /= s.row(i).sum();
      }
      for (int64_t i = 0; i < t; ++i)
        for (int64_t j = 0; j < t; ++j) probs_.at(bi, m, i, j) = s(i, j);
      hom.block(bi * t, m * dh, t, dh).noalias() = s * vb;
    }
  }
  Tensor out = wo.forward(heads_out_);
  return out.reshaped({b, t, d});
}

Tensor MultiHeadSelfAttention::backward(const Tensor& gy) {
  const int64_t b = x_shape_[0], t = x_shape_[1], d = x_shape_[2];
  const int64_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor gho = wo.backward(gy.reshaped({b * t, d}));
  Tensor gq({b * t, d}), gk({b * t, d}), gv({b * t, d});
  auto ghom = gho.as_mat(b * t, d);
  auto gqm = gq.mat(), gkm = gk.mat(), gvm = gv.mat();
  auto qm = q_.as_mat(b * t, d), km = k_.as_mat(b * t, d), vm = v_.as_mat(b * t, d);

  for (int64_t bi = 0; bi < b; ++bi) {
    for (int64_t m = 0; m < heads; ++m) {
      Eigen::MatrixXd p(t, t);
      for (int64_t i = 0; i < t; ++i)
        for (int64_t j = 0; j < t; ++j) p(i, j) = probs_.at(bi, m, i, j);
      const auto go = ghom.block(bi * t, m * dh, t, dh);
      const auto qb = qm.block(bi * t, m * dh, t, dh);
      const auto kb = km.block(bi * t, m * dh, t, dh);
      const auto vb = vm.block(bi * t, m * dh, t, dh);

      Eigen::MatrixXd gp = go * vb.transpose();
      gvm.block(bi * t, m * dh, t, dh).noalias() = p.transpose() * go;

      // softmax backward per row
      Eigen::MatrixXd gs(t, t);
      for (int64_t i = 0; i < t; ++i) {
        const double dot = (gp.row(i).array() * p.row(i).array()).sum();
        gs.row(i) = (gp.row(i).array() - dot) * p.row(i).array();
      }
      gs *= scale;
      gqm.block(bi * t, m * dh, t, dh).noalias() = gs * kb;
      gkm.block(bi * t, m * dh, t, dh).noalias() = gs.transpose() * qb;
    }
  }

  Tensor gx = wq.backward(gq);
  gx.data += wk.backward(gk).data;
  gx.data += wv.backward(gv).data;
  return gx.reshaped(x_shape_);
}

void MultiHeadSelfAttention::collect(std::vector<Param*>& out) {
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  wo.collect(out);
}

// ---- TransformerLayer ------------------------------------------------------------

TransformerLayer::TransformerLayer(const std::string& name, int64_t dim, int64_t heads,
                                   int64_t ff_dim, Rng& rng)
    : attn(name + ".attn", dim, heads, rng),
      ln1(name + ".ln1", dim),
      ln2(name + ".ln2", dim),
      ff1(name + ".ff1", dim, ff_dim, rng),
      ff2(name + ".ff2", ff_dim, dim, rng) {}

Tensor TransformerLayer::infer(const Tensor& x) const {
  Tensor a = attn.infer(x);
  a.data += x.data;
  Tensor h = ln1.infer(a);
  Tensor f = ff2.infer(ff_relu_.infer(ff1.infer(h)));
  f.data += h.data;
  Tensor y = ln2.infer(f);
  return y.reshaped(x.shape());
}

Tensor TransformerLayer::forward(const Tensor& x) {
  shape_ = x.shape();
  Tensor a = attn.forward(x);
  a.data += x.data;
  Tensor h = ln1.forward(a);
  Tensor f = ff2.forward(ff_relu_.forward(ff1.forward(h)));
  f.data += h.data;
  Tensor y = ln2.forward(f);
  return y.reshaped(shape_);
}

Tensor TransformerLayer::backward(const Tensor& gy) {
  Tensor gf = ln2.backward(gy);
  Tensor gh = gf;  // residual branch
  gh.data += ff1.backward(ff_relu_.backward(ff2.backward(gf))).data;
  Tensor ga = ln1.backward(gh);
  Tensor gx = ga;  // residual branch
  gx.data += attn.backward(ga.reshaped(shape_)).data;
  return gx.reshaped(shape_);
}

void TransformerLayer::collect(std::vector<Param*>& out) {
  attn.collect(out);
  ln1.collect(out);
  ln2.collect(out);
  ff1.collect(out);
  ff2.collect(out);
}

// ---- Adam --------------------------------------------------------------------

void Adam::attach(const std::vector<Param*>& params) {
  params_ = params;
  m_.clear();
  v_.clear();
  for (Param* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
  t_ = 0;
}

void Adam::step() {
  t_++;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param* p = params_[i];
    m_[i].data = beta1_ * m_[i].data + (1.0 - beta1_) * p->grad.data;
    v_[i].data = beta2_ * v_[i].data + (1.0 - beta2_) * p->grad.data.square();
    p->value.data -= lr_ * (m_[i].data / bc1) / ((v_[i].data / bc2).sqrt() + eps_);
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

}  // namespace vtd::nn
