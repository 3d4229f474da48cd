#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtd/detector.hpp"
#include "vtd/features.hpp"
#include "vtd/manifest.hpp"
#include "vtd/report.hpp"

namespace vtd {

struct TrainConfig {
  int64_t batch_size = 64;
  double learning_rate = 1e-3;
  int max_epochs = 50;
  int patience = 5;
  uint64_t seed = 0;
  int64_t reduction_ratio = 4;
  int64_t clip_length = kDefaultClipLength;
  int64_t stride = 1;
  int workers = 1;
  bool shuffle_labels = false;  // video-level label permutation (control runs)
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainOutcome {
  Detector detector;  // best-validation weights
  std::vector<EpochLog> log;
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
};

// Adam on the active variant's parameters, early stopping on validation clip
// accuracy. Bit-for-bit reproducible given (features, configs, seed).
TrainOutcome train_detector(std::vector<ClipFeatures> train_feats,
                            std::vector<ClipFeatures> val_feats,
                            const DetectorConfig& dcfg, const TrainConfig& tcfg);

struct ClipScore {
  std::string clip_id;
  Label label = Label::REAL;
  double prob_fake = 0.0;
};

struct EvalOutcome {
  double accuracy_percent = 0.0;
  std::vector<ClipScore> clips;
};

// Decision rule: prob >= 0.5 counts as FAKE (ties go to FAKE).
bool decide_fake(double prob_fake);
double accuracy_percent(const std::vector<ClipScore>& scored);

EvalOutcome evaluate_clips(const Detector& det, const std::vector<ClipFeatures>& feats);

// Per-clip probability dump: one JSON object per line with fields
// clip_id, label, prob_fake. score-external consumes the same format.
void save_clip_scores(const std::vector<ClipScore>& scores, const std::string& path);
std::vector<ClipScore> load_clip_scores(const std::string& path);

// Shared context for the protocol runners.
struct ProtocolContext {
  FrameStore* store = nullptr;
  const FramePredictor* predictor = nullptr;
  const FrameEmbedder* embedder = nullptr;
  DetectorConfig dcfg;
  TrainConfig tcfg;
};

std::vector<ClipFeatures> features_for_split(ProtocolContext& ctx, const Manifest& m,
                                             Split split, bool tolerate_decode_errors);

// Trains one detector per generator manifest, evaluates on every generator's
// TEST split; emits the matrix plus the per-row "Ave." column.
EvalReport cross_generator_matrix(ProtocolContext& ctx,
                                  const std::vector<Manifest>& per_generator);

// Clean-trained detector against degraded copies; rows: "Raw Data / None"
// baseline plus one row per (operation, severity) found in the degraded
// manifests, canonical order.
EvalReport robustness_eval(ProtocolContext& ctx, const Detector& det,
                           const Manifest& clean,
                           const std::vector<Manifest>& degraded);

// Trains global-only, concat, and CA-fusion variants with identical seeds and
// schedules; three-row report.
EvalReport ablation_run(ProtocolContext& ctx, const Manifest& manifest, uint64_t seed);

}  // namespace vtd
