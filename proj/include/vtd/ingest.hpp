#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtd/types.hpp"
#include "vtd/video_io.hpp"

namespace vtd {

// One clip position inside one source video.
struct ClipEntry {
  std::string source_id;
  int64_t start_frame_index = 0;
};

struct ClipIndex {
  std::vector<ClipEntry> entries;
  int64_t clip_length = kDefaultClipLength;
  int64_t stride = 1;
};

// Start indices {0, stride, 2*stride, ...} with start + clip_length <= frame_count.
// Count is floor((frame_count - clip_length) / stride) + 1 when the video is
// long enough, else 0. Short videos are not an error.
std::vector<int64_t> slice_clips(int64_t frame_count, int64_t clip_length, int64_t stride);

// Clip enumeration for every record of a manifest (optionally one split).
struct ClipRef {
  const VideoRecord* record = nullptr;
  int64_t start = 0;
};
std::vector<ClipRef> enumerate_clips(const std::vector<VideoRecord>& records,
                                     int64_t clip_length, int64_t stride);

struct SplitAssignment {
  Manifest manifest;
  std::vector<std::string> warnings;  // EmptyStratum notes
};

// Deterministic per-(label, generator_tag) stratified split at video level.
// Largest-remainder rounding keeps every stratum within one record of
// ratio * stratum_size per split.
SplitAssignment assign_splits(std::vector<VideoRecord> records,
                              const std::array<double, 3>& ratio, uint64_t seed);

// Materializes the clip at `start` from decoded frames.
Clip make_clip(const VideoRecord& rec, const DecodedVideo& video, int64_t start,
               int64_t clip_length);

}  // namespace vtd
