#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vtd/transcoder.hpp"
#include "vtd/types.hpp"

namespace vtd {

enum class MotionModel { CONSTANT_VELOCITY, SINE_PATH };
enum class DefectKind { APPEARANCE_DRIFT, MOTION_JITTER, BOTH };

const char* to_string(MotionModel m);
const char* to_string(DefectKind d);  // generator tags: drift / jitter / mixed
MotionModel motion_model_from_string(const std::string& s);
DefectKind defect_kind_from_string(const std::string& s);

struct SynthSpec {
  int64_t height = 64;
  int64_t width = 64;
  int64_t frames_per_video = 24;
  int64_t n_videos_per_class = 50;
  MotionModel motion = MotionModel::CONSTANT_VELOCITY;
  std::vector<DefectKind> fake_families{DefectKind::BOTH};
  // Unit-free defect strength. Jitter displacement sigma is 10*magnitude px,
  // object scale sigma 0.6*magnitude, brightness sigma 0.5*magnitude.
  double defect_magnitude = 0.15;
  uint64_t seed = 0;
  int crf = 18;  // corpus encode quality
  int fps = 24;
  double speed_min = 1.0;  // per-axis speed bounds, px/frame
  double speed_max = 2.0;
  // Constant-velocity camera pan (px/frame) and background texture amplitude.
  // A pan plus strong texture makes every inter frame cost real bits, which
  // rate-control tests need; the defaults keep the background static.
  int64_t scroll_x = 0;
  int64_t scroll_y = 0;
  double background_detail = 0.04;
};

// Per-frame ground truth, mainly for tests.
struct SceneTruth {
  std::vector<std::array<double, 2>> positions;  // object top-left (x, y)
  std::vector<double> scales;
  std::vector<double> brightness;
  std::vector<int64_t> mask_area;  // rendered coverage > 0.5 pixel count
  int64_t object_w = 0, object_h = 0;
};

// Textured moving object over a static textured background; motion is exactly
// consistent frame to frame. Deterministic per (spec.seed, index).
std::vector<Frame> gen_real_video(const SynthSpec& spec, int64_t index,
                                  SceneTruth* truth = nullptr);

// Same scene family plus per-frame defects: APPEARANCE_DRIFT perturbs object
// scale and brightness independently per frame, MOTION_JITTER adds per-frame
// displacement noise. Requires defect_magnitude > 0.
std::vector<Frame> gen_fake_video(const SynthSpec& spec, DefectKind defect, int64_t index,
                                  SceneTruth* truth = nullptr);

struct CorpusResult {
  Manifest manifest;
  std::string manifest_path;
  std::vector<std::string> warnings;
};

// Renders and H.265-encodes the corpus under out_dir/videos, assigns splits,
// writes out_dir/manifest.jsonl.
CorpusResult build_synthetic_corpus(const SynthSpec& spec, const Transcoder& tc,
                                    const std::string& out_dir,
                                    const std::array<double, 3>& ratio, int workers);

}  // namespace vtd
