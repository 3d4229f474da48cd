#include "vtd/fusion.hpp"

#include <cmath>

#include "vtd/errors.hpp"

namespace vtd {

FusionGate::FusionGate(int64_t channels, int64_t reduction, Rng& rng)
    : channels_(channels), reduction_(reduction) {
  if (reduction <= 0 || channels % reduction != 0)
    throw DimensionMismatch("reduction ratio must divide channel count");
  const int64_t hidden = channels / reduction;
  w1 = nn::Linear("fusion.w1", channels, hidden, rng, /*bias=*/false);
  w2 = nn::Linear("fusion.w2", hidden, channels, rng, /*bias=*/false);
  bn1 = nn::BatchNorm1d("fusion.bn1", hidden);
  bn2 = nn::BatchNorm1d("fusion.bn2", channels);
}

Tensor FusionGate::forward(const Tensor& s, nn::Mode mode) {
  if (s.ndim() != 2 || s.dim(1) != channels_)
    throw DimensionMismatch("gate input must be [N, " + std::to_string(channels_) + "]");
  Tensor t = bn1.forward(w1.forward(s), mode);
  t = relu_.forward(t);
  t = bn2.forward(w2.forward(t), mode);
  rho_ = nn::sigmoid(t);
  return rho_;
}

Tensor FusionGate::infer(const Tensor& s) const {
  if (s.ndim() != 2 || s.dim(1) != channels_)
    throw DimensionMismatch("gate input must be [N, " + std::to_string(channels_) + "]");
  Tensor t = bn1.infer(w1.infer(s));
  t = relu_.infer(t);
  t = bn2.infer(w2.infer(t));
  return nn::sigmoid(t);
}

Tensor FusionGate::backward(const Tensor& grho) {
  Tensor gz = grho;
  gz.data *= rho_.data * (1.0 - rho_.data);
  Tensor g = w2.backward(bn2.backward(gz));
  g = relu_.backward(g);
  return w1.backward(bn1.backward(g));
}

std::vector<nn::Param*> FusionGate::params() {
  std::vector<nn::Param*> out;
  w1.collect(out);
  bn1.collect(out);
  w2.collect(out);
  bn2.collect(out);
  return out;
}

void FusionGate::save_into(Checkpoint& ck, const std::string& prefix) const {
  auto* self = const_cast<FusionGate*>(this);
  for (nn::Param* p : self->params()) ck.add(prefix + p->name, p->value);
  ck.add(prefix + "fusion.bn1.run_mean", bn1.run_mean);
  ck.add(prefix + "fusion.bn1.run_var", bn1.run_var);
  ck.add(prefix + "fusion.bn2.run_mean", bn2.run_mean);
  ck.add(prefix + "fusion.bn2.run_var", bn2.run_var);
}

void FusionGate::load_from(const Checkpoint& ck, const std::string& prefix) {
  for (nn::Param* p : params()) {
    p->value = ck.get(prefix + p->name);
    p->zero_grad();
  }
  bn1.run_mean = ck.get(prefix + "fusion.bn1.run_mean");
  bn1.run_var = ck.get(prefix + "fusion.bn1.run_var");
  bn2.run_mean = ck.get(prefix + "fusion.bn2.run_mean");
  bn2.run_var = ck.get(prefix + "fusion.bn2.run_var");
  bn1.check_running_variance();
  bn2.check_running_variance();
}

Tensor fuse(const Tensor& f_local, const Tensor& f_glob, const Tensor& rho) {
  if (!f_local.same_shape(f_glob) || !f_local.same_shape(rho))
    throw DimensionMismatch("fuse inputs must share one shape");
  Tensor out = f_local;
  out.data = rho.data * f_local.data + (1.0 - rho.data) * f_glob.data;
  return out;
}

FuseGrads fuse_backward(const Tensor& g_fused, const Tensor& f_local,
                        const Tensor& f_glob, const Tensor& rho) {
  FuseGrads g;
  g.g_local = g_fused;
  g.g_local.data = g_fused.data * rho.data;
  g.g_glob = g_fused;
  g.g_glob.data = g_fused.data * (1.0 - rho.data);
  g.g_rho = g_fused;
  g.g_rho.data = g_fused.data * (f_local.data - f_glob.data);
  return g;
}

// ---- ClassifierHead ---------------------------------------------------------

ClassifierHead::ClassifierHead(int64_t in_dim, Rng& rng) {
  lin = nn::Linear("head", in_dim, 1, rng);
}

Tensor ClassifierHead::forward(const Tensor& x) {
  Tensor z = lin.forward(x);
  prob_ = nn::sigmoid(z);
  return prob_.reshaped({x.dim(0)});
}

Tensor ClassifierHead::infer(const Tensor& x) const {
  Tensor z = lin.infer(x);
  return nn::sigmoid(z).reshaped({x.dim(0)});
}

Tensor ClassifierHead::backward(const Tensor& gprob) {
  Tensor gz = gprob.reshaped({gprob.numel(), 1});
  gz.data *= prob_.data * (1.0 - prob_.data);
  return lin.backward(gz);
}

std::vector<nn::Param*> ClassifierHead::params() {
  std::vector<nn::Param*> out;
  lin.collect(out);
  return out;
}

void ClassifierHead::save_into(Checkpoint& ck, const std::string& prefix) const {
  auto* self = const_cast<ClassifierHead*>(this);
  for (nn::Param* p : self->params()) ck.add(prefix + p->name, p->value);
}

void ClassifierHead::load_from(const Checkpoint& ck, const std::string& prefix) {
  for (nn::Param* p : params()) {
    p->value = ck.get(prefix + p->name);
    p->zero_grad();
  }
}

// ---- loss ---------------------------------------------------------------------

double bce_loss(const Tensor& probs, const Tensor& labels) {
  if (probs.numel() != labels.numel())
    throw LengthMismatch("probabilities and labels differ in length");
  const int64_t n = probs.numel();
  if (n == 0) throw LengthMismatch("empty batch");
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double p = std::clamp(probs.data[i], kBceEpsilon, 1.0 - kBceEpsilon);
    const double y = labels.data[i];
    loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return loss / static_cast<double>(n);
}

Tensor bce_grad(const Tensor& probs, const Tensor& labels) {
  if (probs.numel() != labels.numel())
    throw LengthMismatch("probabilities and labels differ in length");
  const int64_t n = probs.numel();
  Tensor g(probs.shape());
  for (int64_t i = 0; i < n; ++i) {
    const double raw = probs.data[i];
    if (raw < kBceEpsilon || raw > 1.0 - kBceEpsilon) {
      g.data[i] = 0.0;  // clamp plateau
      continue;
    }
    const double y = labels.data[i];
    g.data[i] = (-y / raw + (1.0 - y) / (1.0 - raw)) / static_cast<double>(n);
  }
  return g;
}

}  // namespace vtd
