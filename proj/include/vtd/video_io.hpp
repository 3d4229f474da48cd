#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vtd/transcoder.hpp"
#include "vtd/types.hpp"

namespace vtd {

Frame frame_from_rgb8(const uint8_t* rgb, int width, int height, int64_t timestamp_index);
void frame_to_rgb8(const Frame& f, uint8_t* rgb_out);

struct DecodedVideo {
  std::vector<Frame> frames;
  bool degraded = false;  // decoder reported (and concealed) bitstream errors
};

// Decodes a video into presentation-order frames with pixels in [0, 1].
// Throws DecodeError for unreadable input and EmptyVideo for zero frames.
// tolerate_errors keeps concealed-error streams usable (degraded = true);
// without it any decoder-reported corruption is a DecodeError.
DecodedVideo decode_video(const Transcoder& tc, const std::string& path,
                          bool tolerate_errors = false);

// Lossless pre-extraction cache, layout <dir>/<source_id>/<frame_index>.png.
void write_frame_cache(const std::string& dir, const std::string& source_id,
                       const std::vector<Frame>& frames);
std::vector<Frame> read_frame_cache(const std::string& dir, const std::string& source_id);
bool frame_cache_present(const std::string& dir, const std::string& source_id,
                         int64_t frame_count);

// Memoizing decode front-end so clip materialization can stay lazy without
// re-decoding a video per clip. Thread-safe; entries are immutable once added.
class FrameStore {
 public:
  explicit FrameStore(const Transcoder* tc, std::string cache_dir = {})
      : tc_(tc), cache_dir_(std::move(cache_dir)) {}

  const DecodedVideo& get(const std::string& path, bool tolerate_errors = false);
  void clear();

 private:
  const Transcoder* tc_;
  std::string cache_dir_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<DecodedVideo>> loaded_;
};

}  // namespace vtd
