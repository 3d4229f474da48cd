#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vtd/errors.hpp"
#include "vtd/tensor.hpp"

namespace vtd {

// Frames per clip. The detection pipeline takes 7 temporally adjacent frames;
// kept configurable through TrainConfig for experiments over clip length.
inline constexpr int kDefaultClipLength = 7;

// Clip-level decision threshold; probability >= threshold counts as FAKE.
inline constexpr double kDecisionThreshold = 0.5;

enum class Label { REAL, FAKE };
enum class Split { TRAIN, VAL, TEST };
enum class DegradeOp { NONE, BIT_ERROR, H265_ABR, H265_CRF };

const char* to_string(Label v);
const char* to_string(Split v);
const char* to_string(DegradeOp v);
Label label_from_string(const std::string& s);
Split split_from_string(const std::string& s);
DegradeOp degrade_op_from_string(const std::string& s);

struct DegradationSpec {
  DegradeOp operation = DegradeOp::NONE;
  int severity = 0;  // 1..3, or 0 iff operation == NONE

  bool is_none() const { return operation == DegradeOp::NONE; }
  bool valid() const {
    return is_none() ? severity == 0 : (severity >= 1 && severity <= 3);
  }
  // row label in robustness tables, e.g. "H.265 CRF / 2" or "Raw Data / None"
  std::string row_label() const;

  friend bool operator==(const DegradationSpec&, const DegradationSpec&) = default;
};

// One decoded video frame. Pixels are H x W x 3 (row-major HWC) in [0, 1].
struct Frame {
  Tensor pixels;
  int64_t timestamp_index = 0;

  int64_t height() const { return pixels.dim(0); }
  int64_t width() const { return pixels.dim(1); }

  // empty string when all invariants hold, otherwise a description
  std::string violation() const;
};

struct Clip {
  std::vector<Frame> frames;
  std::string source_id;
  Label label = Label::REAL;
  std::string generator_tag;  // empty = NONE (real video)
  DegradationSpec degradation;
  bool decode_degraded = false;  // decoder reported and concealed bitstream errors

  int64_t length() const { return static_cast<int64_t>(frames.size()); }
  std::string violation(int64_t expected_length = kDefaultClipLength) const;
};

struct VideoRecord {
  std::string path;
  Label label = Label::REAL;
  std::string generator_tag;  // empty = NONE; required nonempty for FAKE
  Split split = Split::TRAIN;
  int64_t frame_count = 0;
  DegradationSpec degradation;

  std::string source_id() const;  // filename stem; unique within a manifest

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

struct Manifest {
  std::vector<VideoRecord> records;
  uint64_t split_seed = 0;
  std::array<double, 3> split_ratio{0.8, 0.1, 0.1};

  std::vector<VideoRecord> in_split(Split s) const;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

}  // namespace vtd
