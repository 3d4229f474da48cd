#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vtd {

struct ProbeInfo {
  int width = 0;
  int height = 0;
  int fps_num = 24;
  int fps_den = 1;
  int64_t frame_count = 0;
  double duration_s = 0.0;
  int64_t stream_bytes = 0;
  double stream_bit_rate = 0.0;  // bits/s, video stream payload only

  double fps() const { return fps_den ? static_cast<double>(fps_num) / fps_den : 0.0; }
  std::string fps_string() const { return std::to_string(fps_num) + "/" + std::to_string(fps_den); }
};

struct DecodeInfo {
  int width = 0;
  int height = 0;
  int64_t frames = 0;
  int64_t packets = 0;
  int64_t decode_errors = 0;

  bool degraded() const { return decode_errors > 0 || frames != packets; }
};

// Subprocess client for the external H.265 transcoder. Each operation is an
// argument template with {placeholders}; defaults target the bundled
// vtdcodec tool and can be swapped for another transcoder via the config
// file. The executable itself resolves from (in order): explicit path,
// VTD_TRANSCODER, vtdcodec next to the current binary, PATH.
class Transcoder {
 public:
  struct Config {
    std::string exe;  // empty = auto-discover
    std::map<std::string, std::string> templates;  // overrides per operation
  };

  explicit Transcoder(Config cfg = {});

  static const std::map<std::string, std::string>& default_templates();

  const std::string& exe() const { return exe_; }

  ProbeInfo probe(const std::string& video) const;
  // decodes into a raw rgb24 file; error concealment stays on so degraded
  // streams still yield frames
  DecodeInfo decode(const std::string& video, const std::string& rgb_out) const;
  void encode_rgb(const std::string& rgb_in, const std::string& video_out, int width,
                  int height, const std::string& fps, int crf) const;
  void transcode_crf(const std::string& in, const std::string& out, int crf) const;
  void transcode_abr(const std::string& in, const std::string& out, int64_t bitrate_bps) const;
  void extract_stream(const std::string& in, const std::string& stream_out) const;
  void mux_stream(const std::string& stream_in, const std::string& video_out,
                  const std::string& fps) const;

 private:
  std::vector<std::string> expand(const std::string& op,
                                  const std::map<std::string, std::string>& values) const;
  std::map<std::string, std::string> run_kv(const std::string& op,
                                            const std::map<std::string, std::string>& values) const;

  std::string exe_;
  std::map<std::string, std::string> templates_;
};

// unique scratch path under the system temp dir; caller owns cleanup
std::string temp_path(const std::string& suffix);

}  // namespace vtd
