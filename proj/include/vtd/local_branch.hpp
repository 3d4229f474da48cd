#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtd/checkpoint.hpp"
#include "vtd/nn.hpp"
#include "vtd/types.hpp"

namespace vtd {

// HWC ([H,W,3]) <-> CHW ([3,H,W]) conversions between the frame contract and
// the conv stack layout.
Tensor hwc_to_chw(const Tensor& hwc);
Tensor chw_to_hwc(const Tensor& chw);

struct PredictionErrorMap {
  Tensor residual;  // [H, W, 3] signed, predicted - actual
  int64_t pair_index = 0;
};

// Two-frames-to-next-frame convolutional predictor. The network regresses a
// delta on top of the second input frame, so an untrained predictor already
// behaves like copy-last-frame. Frozen after training; inference on a frozen
// predictor is read-only and safe for concurrent callers.
class FramePredictor {
 public:
  struct Arch {
    int64_t base_channels = 16;
  };

  FramePredictor() = default;
  FramePredictor(const Arch& arch, Rng& rng);

  // x: [N, 6, H, W] (two stacked frames); returns predicted frame [N, 3, H, W],
  // values unclamped.
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;

  std::vector<nn::Param*> params();
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  void save_into(Checkpoint& ck, const std::string& prefix) const;
  void load_from(const Checkpoint& ck, const std::string& prefix);

  Arch arch;

 private:
  nn::Conv2d c1_, c2_, c3_, c4_, c5_, c6_;
  nn::Upsample2x up1_, up2_;
  nn::ReLU r1_, r2_, r3_, r4_, r5_;
  Tensor second_frame_;  // cached residual connection input
  bool frozen_ = false;
};

struct PredictorTrainConfig {
  int64_t batch_size = 8;
  double learning_rate = 1e-3;
  int max_epochs = 12;
  int patience = 3;
  uint64_t seed = 0;
  int64_t base_channels = 16;
  // caps per-epoch triples so long corpora stay minutes-scale
  int64_t max_samples_per_epoch = 768;
};

struct PredictorTrainSummary {
  double best_val_mae = 0.0;
  int epochs_run = 0;
  std::vector<std::string> warnings;
  std::vector<std::pair<double, double>> epoch_log;  // (train mae, val mae)
};

// Trains on (f_t, f_{t+1}) -> f_{t+2} triples drawn from REAL clips only;
// any FAKE clip raises LabelLeakError. Returns the best-validation predictor,
// frozen.
FramePredictor train_frame_predictor(const std::vector<Clip>& train_clips,
                                     const std::vector<Clip>& val_clips,
                                     const PredictorTrainConfig& cfg,
                                     PredictorTrainSummary* summary = nullptr);

// P(f_t, f_next) -> predicted next frame, [H, W, 3] unclamped.
Tensor predict_frame(const FramePredictor& p, const Frame& f_t, const Frame& f_next);

// residual_t = P(f_t, f_{t+1}) - f_{t+2} for t = 0..T-3 (exactly T-2 maps).
std::vector<PredictionErrorMap> compute_prediction_errors(const FramePredictor& p,
                                                          const Clip& clip);

// Elementwise temporal mean of the residual maps.
Tensor aggregate_prediction_errors(const std::vector<PredictionErrorMap>& maps);

// F_l: strided conv encoder with global average pooling to a C-vector.
class LocalEncoder {
 public:
  LocalEncoder() = default;
  LocalEncoder(int64_t out_dim, Rng& rng);

  // x: [N, 3, H, W] aggregated error maps -> [N, C]
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;
  std::vector<nn::Param*> params();

  void save_into(Checkpoint& ck, const std::string& prefix) const;
  void load_from(const Checkpoint& ck, const std::string& prefix);

  int64_t out_dim() const { return out_dim_; }

 private:
  int64_t out_dim_ = 0;
  nn::Conv2d c1_, c2_, c3_, c4_;
  nn::ReLU r1_, r2_, r3_, r4_;
  nn::GlobalAvgPool2d pool_;
};

}  // namespace vtd
