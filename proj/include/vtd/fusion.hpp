#pragma once

#include <cstdint>
#include <vector>

#include "vtd/checkpoint.hpp"
#include "vtd/nn.hpp"

namespace vtd {

// Channel-attention gate: rho = sigmoid(BN2(W2 * ReLU(BN1(W1 * s)))) with
// s = f_local + f_glob. W1: [C/r, C], W2: [C, C/r], both bias-free (the BN
// shifts absorb any bias). Gate entries are strictly inside (0, 1).
class FusionGate {
 public:
  FusionGate() = default;
  FusionGate(int64_t channels, int64_t reduction, Rng& rng);

  // s: [N, C] -> rho: [N, C]
  Tensor forward(const Tensor& s, nn::Mode mode);
  Tensor backward(const Tensor& grho);
  Tensor infer(const Tensor& s) const;
  std::vector<nn::Param*> params();

  void save_into(Checkpoint& ck, const std::string& prefix) const;
  void load_from(const Checkpoint& ck, const std::string& prefix);

  int64_t channels() const { return channels_; }
  int64_t reduction() const { return reduction_; }

  nn::Linear w1, w2;
  nn::BatchNorm1d bn1, bn2;

 private:
  int64_t channels_ = 0, reduction_ = 4;
  nn::ReLU relu_;
  Tensor rho_;  // cached sigmoid output
};

// f_a[c] = rho[c] * f_local[c] + (1 - rho[c]) * f_glob[c], all [N, C].
Tensor fuse(const Tensor& f_local, const Tensor& f_glob, const Tensor& rho);

struct FuseGrads {
  Tensor g_local, g_glob, g_rho;
};
FuseGrads fuse_backward(const Tensor& g_fused, const Tensor& f_local,
                        const Tensor& f_glob, const Tensor& rho);

// Linear head + sigmoid; emits P(FAKE) per row.
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(int64_t in_dim, Rng& rng);

  // x: [N, C] -> probabilities [N]
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gprob);
  Tensor infer(const Tensor& x) const;
  std::vector<nn::Param*> params();

  void save_into(Checkpoint& ck, const std::string& prefix) const;
  void load_from(const Checkpoint& ck, const std::string& prefix);

  nn::Linear lin;

 private:
  Tensor prob_;
};

// Mean binary cross-entropy with probabilities clamped to [eps, 1-eps].
inline constexpr double kBceEpsilon = 1e-7;
double bce_loss(const Tensor& probs, const Tensor& labels);
Tensor bce_grad(const Tensor& probs, const Tensor& labels);

}  // namespace vtd
