#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtd/detector.hpp"
#include "vtd/global_branch.hpp"
#include "vtd/local_branch.hpp"
#include "vtd/video_io.hpp"

namespace vtd {

// Frozen-branch inputs for one clip: aggregated prediction-error map for the
// local encoder and the embedding sequence for the temporal transformer.
struct ClipFeatures {
  std::string clip_id;  // "<source_id>:<start>"
  std::string source_id;
  int64_t start = 0;
  Label label = Label::REAL;
  std::string generator_tag;
  DegradationSpec degradation;
  bool decode_degraded = false;
  Tensor agg_chw;  // [3, H, W]
  Tensor emb;      // [T, D]
};

struct FeatureBuildConfig {
  int64_t clip_length = kDefaultClipLength;
  int64_t stride = 1;
  bool abs_map = false;
  int workers = 1;
  bool tolerate_decode_errors = false;  // degraded corpora decode with concealment
};

struct FeatureBuildFailure {
  std::string path;
  std::string reason;
};

// Decodes each record once, slices clips, and runs the frozen predictor and
// embedder. Per-record decode failures are collected, not fatal. Output order
// follows record order regardless of worker count.
std::vector<ClipFeatures> build_clip_features(const std::vector<VideoRecord>& records,
                                              FrameStore& store,
                                              const FramePredictor& predictor,
                                              const EmbeddingSource& embedder,
                                              const FeatureBuildConfig& cfg,
                                              std::vector<FeatureBuildFailure>* failures);

}  // namespace vtd
