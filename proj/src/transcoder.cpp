#include "vtd/transcoder.hpp"

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "vtd/errors.hpp"
#include "vtd/subprocess.hpp"

namespace vtd {

namespace fs = std::filesystem;

std::string temp_path(const std::string& suffix) {
  static std::atomic<uint64_t> counter{0};
  std::ostringstream name;
  name << "vtd_scratch_" << ::getpid() << "_" << counter.fetch_add(1) << suffix;
  return (fs::temp_directory_path() / name.str()).string();
}

namespace {

std::string discover_exe() {
  if (const char* env = std::getenv("VTD_TRANSCODER"); env && *env) return env;
  // sibling of the running binary (the usual build layout)
  std::error_code ec;
  fs::path self = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    fs::path sibling = self.parent_path() / "vtdcodec";
    if (fs::exists(sibling)) return sibling.string();
  }
  return "vtdcodec";  // rely on PATH
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

int64_t kv_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  return it == kv.end() ? 0 : std::strtoll(it->second.c_str(), nullptr, 10);
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  return it == kv.end() ? 0.0 : std::strtod(it->second.c_str(), nullptr);
}

std::string first_error_line(const std::string& err) {
  std::istringstream is(err);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) return line;
  return "(no stderr)";
}

}  // namespace

const std::map<std::string, std::string>& Transcoder::default_templates() {
  static const std::map<std::string, std::string> kDefaults = {
      {"probe", "{exe} probe {in}"},
      {"decode", "{exe} decode {in} --out {out} --conceal"},
      {"encode", "{exe} encode --in {in} --out {out} --width {width} --height {height} "
                 "--fps {fps} --crf {crf}"},
      {"transcode_crf", "{exe} transcode {in} --out {out} --crf {crf}"},
      {"transcode_abr", "{exe} transcode {in} --out {out} --bitrate-bps {bps}"},
      {"extract", "{exe} extract {in} --out {out}"},
      {"mux", "{exe} mux {in} --out {out} --fps {fps}"},
  };
  return kDefaults;
}

Transcoder::Transcoder(Config cfg)
    : exe_(cfg.exe.empty() ? discover_exe() : cfg.exe), templates_(default_templates()) {
  for (auto& [k, v] : cfg.templates) templates_[k] = v;
}

std::vector<std::string> Transcoder::expand(
    const std::string& op, const std::map<std::string, std::string>& values) const {
  auto it = templates_.find(op);
  if (it == templates_.end()) throw Error("ConfigError", "no transcoder template for " + op);
  std::vector<std::string> argv;
  std::istringstream is(it->second);
  std::string token;
  while (is >> token) {
    for (const auto& [key, val] : values) {
      const std::string ph = "{" + key + "}";
      size_t at;
      while ((at = token.find(ph)) != std::string::npos) token.replace(at, ph.size(), val);
    }
    const std::string exe_ph = "{exe}";
    if (size_t at = token.find(exe_ph); at != std::string::npos)
      token.replace(at, exe_ph.size(), exe_);
    argv.push_back(token);
  }
  return argv;
}

std::map<std::string, std::string> Transcoder::run_kv(
    const std::string& op, const std::map<std::string, std::string>& values) const {
  const auto argv = expand(op, values);
  ProcessResult res = run_process(argv);
  if (res.exit_code == 127)
    throw TranscoderUnavailable("transcoder executable not found: " + argv[0]);
  if (!res.ok())
    throw TranscodeFailed(op + " exited " + std::to_string(res.exit_code) + ": " +
                          first_error_line(res.err));
  return parse_kv(res.out);
}

ProbeInfo Transcoder::probe(const std::string& video) const {
  const auto kv = run_kv("probe", {{"in", video}});
  ProbeInfo p;
  p.width = static_cast<int>(kv_int(kv, "width"));
  p.height = static_cast<int>(kv_int(kv, "height"));
  if (auto it = kv.find("fps"); it != kv.end())
    std::sscanf(it->second.c_str(), "%d/%d", &p.fps_num, &p.fps_den);
  p.frame_count = kv_int(kv, "frames");
  p.duration_s = kv_double(kv, "duration_s");
  p.stream_bytes = kv_int(kv, "stream_bytes");
  p.stream_bit_rate = kv_double(kv, "stream_bit_rate");
  return p;
}

DecodeInfo Transcoder::decode(const std::string& video, const std::string& rgb_out) const {
  const auto kv = run_kv("decode", {{"in", video}, {"out", rgb_out}});
  DecodeInfo d;
  d.width = static_cast<int>(kv_int(kv, "width"));
  d.height = static_cast<int>(kv_int(kv, "height"));
  d.frames = kv_int(kv, "frames");
  d.packets = kv_int(kv, "packets");
  d.decode_errors = kv_int(kv, "decode_errors");
  return d;
}

void Transcoder::encode_rgb(const std::string& rgb_in, const std::string& video_out,
                            int width, int height, const std::string& fps, int crf) const {
  run_kv("encode", {{"in", rgb_in},
                    {"out", video_out},
                    {"width", std::to_string(width)},
                    {"height", std::to_string(height)},
                    {"fps", fps},
                    {"crf", std::to_string(crf)}});
}

void Transcoder::transcode_crf(const std::string& in, const std::string& out, int crf) const {
  run_kv("transcode_crf", {{"in", in}, {"out", out}, {"crf", std::to_string(crf)}});
}

void Transcoder::transcode_abr(const std::string& in, const std::string& out,
                               int64_t bitrate_bps) const {
  run_kv("transcode_abr", {{"in", in}, {"out", out}, {"bps", std::to_string(bitrate_bps)}});
}

void Transcoder::extract_stream(const std::string& in, const std::string& stream_out) const {
  run_kv("extract", {{"in", in}, {"out", stream_out}});
}

void Transcoder::mux_stream(const std::string& stream_in, const std::string& video_out,
                            const std::string& fps) const {
  run_kv("mux", {{"in", stream_in}, {"out", video_out}, {"fps", fps}});
}

}  // namespace vtd
