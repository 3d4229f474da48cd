#include "vtd/video_io.hpp"

#include <filesystem>
#include <fstream>

#include "vtd/errors.hpp"
#include "vtd/png_io.hpp"

namespace vtd {

namespace fs = std::filesystem;

Frame frame_from_rgb8(const uint8_t* rgb, int width, int height, int64_t timestamp_index) {
  Frame f;
  f.pixels = Tensor({height, width, 3});
  const int64_t n = static_cast<int64_t>(width) * height * 3;
  for (int64_t i = 0; i < n; ++i) f.pixels.data[i] = static_cast<double>(rgb[i]) / 255.0;
  f.timestamp_index = timestamp_index;
  return f;
}

void frame_to_rgb8(const Frame& f, uint8_t* rgb_out) {
  const int64_t n = f.pixels.numel();
  for (int64_t i = 0; i < n; ++i) {
    const double v = std::clamp(f.pixels.data[i], 0.0, 1.0);
    rgb_out[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
}

DecodedVideo decode_video(const Transcoder& tc, const std::string& path, bool tolerate_errors) {
  if (!fs::exists(path)) throw DecodeError("no such file: " + path);
  const std::string raw = temp_path(".rgb");
  DecodeInfo info;
  try {
    info = tc.decode(path, raw);
  } catch (const TranscodeFailed& e) {
    std::error_code ec;
    fs::remove(raw, ec);
    throw DecodeError(std::string("decoder failed on ") + path + " (" + e.what() + ")");
  }

  DecodedVideo out;
  out.degraded = info.degraded();
  if (info.frames == 0) {
    std::error_code ec;
    fs::remove(raw, ec);
    throw EmptyVideo("no frames decoded from " + path);
  }
  if (out.degraded && !tolerate_errors) {
    std::error_code ec;
    fs::remove(raw, ec);
    throw DecodeError("bitstream errors in " + path + " (decode_errors=" +
                      std::to_string(info.decode_errors) + ")");
  }

  std::ifstream is(raw, std::ios::binary);
  if (!is) throw DecodeError("raw frame buffer missing for " + path);
  const size_t frame_bytes = static_cast<size_t>(info.width) * info.height * 3;
  std::vector<uint8_t> buf(frame_bytes);
  out.frames.reserve(static_cast<size_t>(info.frames));
  for (int64_t i = 0; i < info.frames; ++i) {
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(frame_bytes)))
      throw DecodeError("raw frame buffer truncated for " + path);
    out.frames.push_back(frame_from_rgb8(buf.data(), info.width, info.height, i));
  }
  is.close();
  std::error_code ec;
  fs::remove(raw, ec);
  return out;
}

void write_frame_cache(const std::string& dir, const std::string& source_id,
                       const std::vector<Frame>& frames) {
  const fs::path base = fs::path(dir) / source_id;
  fs::create_directories(base);
  std::vector<uint8_t> rgb;
  for (size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    ImageRgb8 img;
    img.width = static_cast<int>(f.width());
    img.height = static_cast<int>(f.height());
    img.pixels.resize(static_cast<size_t>(f.pixels.numel()));
    frame_to_rgb8(f, img.pixels.data());
    write_png_rgb8((base / (std::to_string(i) + ".png")).string(), img);
  }
}

std::vector<Frame> read_frame_cache(const std::string& dir, const std::string& source_id) {
  const fs::path base = fs::path(dir) / source_id;
  std::vector<Frame> frames;
  for (int64_t i = 0;; ++i) {
    const fs::path p = base / (std::to_string(i) + ".png");
    if (!fs::exists(p)) break;
    const ImageRgb8 img = read_png_rgb8(p.string());
    frames.push_back(frame_from_rgb8(img.pixels.data(), img.width, img.height, i));
  }
  if (frames.empty()) throw Error("IoError", "empty frame cache for " + source_id);
  return frames;
}

bool frame_cache_present(const std::string& dir, const std::string& source_id,
                         int64_t frame_count) {
  if (dir.empty()) return false;
  const fs::path base = fs::path(dir) / source_id;
  if (frame_count <= 0) return false;
  return fs::exists(base / "0.png") &&
         fs::exists(base / (std::to_string(frame_count - 1) + ".png"));
}

const DecodedVideo& FrameStore::get(const std::string& path, bool tolerate_errors) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = loaded_.find(path); it != loaded_.end()) return *it->second;
  }
  auto video = std::make_unique<DecodedVideo>();
  const std::string source_id = fs::path(path).stem().string();
  bool from_cache = false;
  if (!cache_dir_.empty() && fs::exists(fs::path(cache_dir_) / source_id / "0.png")) {
    video->frames = read_frame_cache(cache_dir_, source_id);
    from_cache = true;
  }
  if (!from_cache) *video = decode_video(*tc_, path, tolerate_errors);

  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = loaded_.emplace(path, std::move(video));
  return *it->second;
}

void FrameStore::clear() {
  std::lock_guard<std::mutex> lock(mu_);
  loaded_.clear();
}

}  // namespace vtd
