#include "vtd/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "vtd/errors.hpp"
#include "vtd/ingest.hpp"
#include "vtd/manifest.hpp"
#include "vtd/rng.hpp"
#include "vtd/video_io.hpp"

namespace vtd {

namespace fs = std::filesystem;

const char* to_string(MotionModel m) {
  return m == MotionModel::CONSTANT_VELOCITY ? "constant_velocity" : "sine_path";
}

const char* to_string(DefectKind d) {
  switch (d) {
    case DefectKind::APPEARANCE_DRIFT: return "drift";
    case DefectKind::MOTION_JITTER: return "jitter";
    default: return "mixed";
  }
}

MotionModel motion_model_from_string(const std::string& s) {
  if (s == "constant_velocity" || s == "cv") return MotionModel::CONSTANT_VELOCITY;
  if (s == "sine_path" || s == "sine") return MotionModel::SINE_PATH;
  throw Error("ParseError", "unknown motion model: " + s);
}

DefectKind defect_kind_from_string(const std::string& s) {
  if (s == "drift") return DefectKind::APPEARANCE_DRIFT;
  if (s == "jitter") return DefectKind::MOTION_JITTER;
  if (s == "mixed" || s == "both") return DefectKind::BOTH;
  throw Error("ParseError", "unknown defect kind: " + s);
}

namespace {

enum class ObjectShape { RECTANGLE, ELLIPSE };

struct Scene {
  Tensor background;  // [H, W, 3]
  Tensor texture;     // [oh, ow, 3] object texture at base size
  ObjectShape shape = ObjectShape::RECTANGLE;
  int64_t ow = 0, oh = 0;
  // base path
  std::vector<std::array<double, 2>> base_positions;
};

Tensor make_background(const SynthSpec& spec, Rng& rng) {
  // canvas covers the full pan range; each frame reads a HxW window
  const int64_t h = spec.height + std::abs(spec.scroll_y) * (spec.frames_per_video - 1);
  const int64_t w = spec.width + std::abs(spec.scroll_x) * (spec.frames_per_video - 1);
  const int64_t g = std::max<int64_t>(8, 8 * std::max(h / spec.height, w / spec.width));
  // coarse color grid, bilinearly upsampled, plus static fine detail
  Tensor grid({g + 1, g + 1, 3});
  for (int64_t i = 0; i < grid.numel(); ++i) grid.data[i] = rng.uniform(0.15, 0.85);
  Tensor bg({h, w, 3});
  for (int64_t y = 0; y < h; ++y) {
    const double gy = static_cast<double>(y) / static_cast<double>(h) * g;
    const int64_t y0 = std::min<int64_t>(static_cast<int64_t>(gy), g - 1);
    const double fy = gy - static_cast<double>(y0);
    for (int64_t x = 0; x < w; ++x) {
      const double gx = static_cast<double>(x) / static_cast<double>(w) * g;
      const int64_t x0 = std::min<int64_t>(static_cast<int64_t>(gx), g - 1);
      const double fx = gx - static_cast<double>(x0);
      for (int64_t c = 0; c < 3; ++c) {
        const double v00 = grid.at(y0, x0, c), v01 = grid.at(y0, x0 + 1, c);
        const double v10 = grid.at(y0 + 1, x0, c), v11 = grid.at(y0 + 1, x0 + 1, c);
        bg.at(y, x, c) = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                         fy * ((1 - fx) * v10 + fx * v11);
      }
    }
  }
  const double amp = spec.background_detail;
  for (int64_t i = 0; i < bg.numel(); ++i)
    bg.data[i] = std::clamp(bg.data[i] + rng.uniform(-amp, amp), 0.0, 1.0);
  return bg;
}

Scene make_scene(const SynthSpec& spec, Rng& rng) {
  Scene sc;
  sc.background = make_background(spec, rng);
  // object spans roughly a quarter to a third of the frame's short side
  const int64_t base = std::max<int64_t>(6, std::min(spec.height, spec.width) / 4);
  const int64_t spread = std::max<int64_t>(2, base / 2);
  sc.ow = base + static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(spread)));
  sc.oh = base + static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(spread)));
  sc.shape = rng.uniform() < 0.5 ? ObjectShape::RECTANGLE : ObjectShape::ELLIPSE;
  sc.texture = Tensor({sc.oh, sc.ow, 3});
  double base_color[3];
  for (double& c : base_color) c = rng.uniform(0.2, 0.9);
  for (int64_t y = 0; y < sc.oh; ++y)
    for (int64_t x = 0; x < sc.ow; ++x)
      for (int64_t c = 0; c < 3; ++c)
        sc.texture.at(y, x, c) = std::clamp(base_color[c] + rng.uniform(-0.12, 0.12), 0.02, 0.98);

  // base path with the whole trajectory inside the frame
  const int64_t t = spec.frames_per_video;
  sc.base_positions.resize(static_cast<size_t>(t));
  const double margin = 1.0;
  if (spec.motion == MotionModel::CONSTANT_VELOCITY) {
    // integer velocity: consecutive-frame displacement is exact by construction
    auto sample_axis = [&](int64_t span, int64_t obj) {
      double v = 0.0;
      for (int64_t mag = static_cast<int64_t>(spec.speed_max); mag >= 1; --mag) {
        const double travel = static_cast<double>(mag) * static_cast<double>(t - 1);
        if (travel + obj + 2 * margin <= static_cast<double>(span)) {
          v = static_cast<double>(mag) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
          break;
        }
      }
      const double travel = std::abs(v) * static_cast<double>(t - 1);
      const double lo = margin + (v < 0 ? travel : 0.0);
      const double hi = static_cast<double>(span) - obj - margin - (v > 0 ? travel : 0.0);
      const double start = std::floor(rng.uniform(lo, std::max(lo + 1.0, hi)));
      return std::make_pair(start, v);
    };
    auto [x0, vx] = sample_axis(spec.width, sc.ow);
    auto [y0, vy] = sample_axis(spec.height, sc.oh);
    if (vx == 0.0 && vy == 0.0 && spec.speed_min > 0.0) vx = 1.0;
    for (int64_t i = 0; i < t; ++i)
      sc.base_positions[static_cast<size_t>(i)] = {x0 + vx * static_cast<double>(i),
                                                   y0 + vy * static_cast<double>(i)};
  } else {
    const double cx = (static_cast<double>(spec.width) - sc.ow) / 2.0;
    const double cy = (static_cast<double>(spec.height) - sc.oh) / 2.0;
    const double ax = rng.uniform(0.3, 1.0) * (cx - margin);
    const double ay = rng.uniform(0.3, 1.0) * (cy - margin);
    const double wx = rng.uniform(0.15, 0.5), wy = rng.uniform(0.15, 0.5);
    const double px = rng.uniform(0.0, 2.0 * M_PI), py = rng.uniform(0.0, 2.0 * M_PI);
    for (int64_t i = 0; i < t; ++i)
      sc.base_positions[static_cast<size_t>(i)] = {
          cx + ax * std::sin(wx * static_cast<double>(i) + px),
          cy + ay * std::cos(wy * static_cast<double>(i) + py)};
  }
  return sc;
}

double shape_coverage(const Scene& sc, double ox, double oy, double ow, double oh) {
  // 2x2 supersampled inside test in object space
  int inside = 0;
  for (int sy = 0; sy < 2; ++sy)
    for (int sx = 0; sx < 2; ++sx) {
      const double px = ox + (sx == 0 ? -0.25 : 0.25);
      const double py = oy + (sy == 0 ? -0.25 : 0.25);
      if (px < 0.0 || px >= ow || py < 0.0 || py >= oh) continue;
      if (sc.shape == ObjectShape::RECTANGLE) {
        inside++;
      } else {
        const double nx = (px - ow / 2.0) / (ow / 2.0);
        const double ny = (py - oh / 2.0) / (oh / 2.0);
        if (nx * nx + ny * ny <= 1.0) inside++;
      }
    }
  return static_cast<double>(inside) / 4.0;
}

double sample_texture(const Scene& sc, double ox, double oy, int64_t c) {
  // bilinear in base-texture space, clamped to edges
  const double fx = std::clamp(ox, 0.0, static_cast<double>(sc.ow) - 1.0);
  const double fy = std::clamp(oy, 0.0, static_cast<double>(sc.oh) - 1.0);
  const int64_t x0 = static_cast<int64_t>(fx), y0 = static_cast<int64_t>(fy);
  const int64_t x1 = std::min(x0 + 1, sc.ow - 1), y1 = std::min(y0 + 1, sc.oh - 1);
  const double ax = fx - static_cast<double>(x0), ay = fy - static_cast<double>(y0);
  return (1 - ay) * ((1 - ax) * sc.texture.at(y0, x0, c) + ax * sc.texture.at(y0, x1, c)) +
         ay * ((1 - ax) * sc.texture.at(y1, x0, c) + ax * sc.texture.at(y1, x1, c));
}

Frame render_frame(const SynthSpec& spec, const Scene& sc, int64_t frame_index,
                   double px, double py, double scale, double brightness,
                   int64_t* mask_area) {
  Frame f;
  f.timestamp_index = frame_index;
  // background window at the pan offset for this frame
  const int64_t bx = spec.scroll_x >= 0
                         ? spec.scroll_x * frame_index
                         : -spec.scroll_x * (spec.frames_per_video - 1 - frame_index);
  const int64_t by = spec.scroll_y >= 0
                         ? spec.scroll_y * frame_index
                         : -spec.scroll_y * (spec.frames_per_video - 1 - frame_index);
  if (spec.scroll_x == 0 && spec.scroll_y == 0) {
    f.pixels = sc.background;
  } else {
    f.pixels = Tensor({spec.height, spec.width, 3});
    for (int64_t y = 0; y < spec.height; ++y)
      for (int64_t x = 0; x < spec.width; ++x)
        for (int64_t c = 0; c < 3; ++c)
          f.pixels.at(y, x, c) = sc.background.at(by + y, bx + x, c);
  }
  const double ow = static_cast<double>(sc.ow) * scale;
  const double oh = static_cast<double>(sc.oh) * scale;

  const int64_t x_lo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(px)) - 1);
  const int64_t x_hi = std::min<int64_t>(spec.width, static_cast<int64_t>(std::ceil(px + ow)) + 1);
  const int64_t y_lo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(py)) - 1);
  const int64_t y_hi = std::min<int64_t>(spec.height, static_cast<int64_t>(std::ceil(py + oh)) + 1);

  int64_t area = 0;
  for (int64_t y = y_lo; y < y_hi; ++y) {
    for (int64_t x = x_lo; x < x_hi; ++x) {
      const double ox = (static_cast<double>(x) - px);
      const double oy = (static_cast<double>(y) - py);
      const double cov = shape_coverage(sc, ox, oy, ow, oh);
      if (cov <= 0.0) continue;
      if (cov > 0.5) area++;
      for (int64_t c = 0; c < 3; ++c) {
        const double tex =
            std::clamp(sample_texture(sc, ox / scale, oy / scale, c) * brightness, 0.0, 1.0);
        f.pixels.at(y, x, c) = cov * tex + (1.0 - cov) * f.pixels.at(y, x, c);
      }
    }
  }
  if (mask_area) *mask_area = area;
  return f;
}

std::vector<Frame> generate(const SynthSpec& spec, bool fake, DefectKind defect,
                            int64_t index, SceneTruth* truth) {
  const std::string stream = std::string(fake ? "fake_" : "real_") +
                             (fake ? to_string(defect) : "") + "_" + std::to_string(index);
  Rng rng = Rng(spec.seed).fork(stream);
  Scene sc = make_scene(spec, rng);

  const bool jitter = fake && (defect == DefectKind::MOTION_JITTER || defect == DefectKind::BOTH);
  const bool drift =
      fake && (defect == DefectKind::APPEARANCE_DRIFT || defect == DefectKind::BOTH);
  const double jitter_sigma = 10.0 * spec.defect_magnitude;
  const double scale_sigma = 0.6 * spec.defect_magnitude;
  const double bright_sigma = 0.5 * spec.defect_magnitude;

  if (truth) {
    *truth = SceneTruth{};
    truth->object_w = sc.ow;
    truth->object_h = sc.oh;
  }

  std::vector<Frame> frames;
  frames.reserve(static_cast<size_t>(spec.frames_per_video));
  for (int64_t t = 0; t < spec.frames_per_video; ++t) {
    double px = sc.base_positions[static_cast<size_t>(t)][0];
    double py = sc.base_positions[static_cast<size_t>(t)][1];
    double scale = 1.0, brightness = 1.0;
    if (jitter) {
      px += rng.normal(0.0, jitter_sigma);
      py += rng.normal(0.0, jitter_sigma);
      px = std::clamp(px, 0.0, static_cast<double>(spec.width - sc.ow));
      py = std::clamp(py, 0.0, static_cast<double>(spec.height - sc.oh));
    }
    if (drift) {
      scale = std::clamp(1.0 + rng.normal(0.0, scale_sigma), 0.55, 1.45);
      brightness = std::clamp(1.0 + rng.normal(0.0, bright_sigma), 0.55, 1.45);
    }
    int64_t area = 0;
    frames.push_back(render_frame(spec, sc, t, px, py, scale, brightness, &area));
    if (truth) {
      truth->positions.push_back({px, py});
      truth->scales.push_back(scale);
      truth->brightness.push_back(brightness);
      truth->mask_area.push_back(area);
    }
  }
  return frames;
}

}  // namespace

std::vector<Frame> gen_real_video(const SynthSpec& spec, int64_t index, SceneTruth* truth) {
  return generate(spec, false, DefectKind::BOTH, index, truth);
}

std::vector<Frame> gen_fake_video(const SynthSpec& spec, DefectKind defect, int64_t index,
                                  SceneTruth* truth) {
  if (spec.defect_magnitude <= 0.0)
    throw Error("Precondition", "fake generation needs defect_magnitude > 0");
  return generate(spec, true, defect, index, truth);
}

CorpusResult build_synthetic_corpus(const SynthSpec& spec, const Transcoder& tc,
                                    const std::string& out_dir,
                                    const std::array<double, 3>& ratio, int workers) {
  if (spec.frames_per_video < kDefaultClipLength)
    throw Error("Precondition", "frames_per_video must cover at least one clip");
  const fs::path videos = fs::path(out_dir) / "videos";
  fs::create_directories(videos);

  struct Item {
    bool fake;
    DefectKind defect;
    int64_t index;
    std::string name;
    std::string tag;
  };
  std::vector<Item> items;
  char buf[32];
  for (int64_t i = 0; i < spec.n_videos_per_class; ++i) {
    std::snprintf(buf, sizeof(buf), "real_%04lld", static_cast<long long>(i));
    items.push_back({false, DefectKind::BOTH, i, buf, ""});
  }
  for (DefectKind family : spec.fake_families) {
    for (int64_t i = 0; i < spec.n_videos_per_class; ++i) {
      std::snprintf(buf, sizeof(buf), "%s_%04lld", to_string(family),
                    static_cast<long long>(i));
      items.push_back({true, family, i, buf, to_string(family)});
    }
  }

  std::vector<std::string> errors(items.size());
  auto render_one = [&](size_t k) {
    const Item& it = items[k];
    try {
      const std::vector<Frame> frames = it.fake
                                            ? gen_fake_video(spec, it.defect, it.index)
                                            : gen_real_video(spec, it.index);
      const std::string raw = temp_path(".rgb");
      {
        std::ofstream os(raw, std::ios::binary | std::ios::trunc);
        std::vector<uint8_t> rgb(static_cast<size_t>(spec.width * spec.height * 3));
        for (const Frame& f : frames) {
          frame_to_rgb8(f, rgb.data());
          os.write(reinterpret_cast<const char*>(rgb.data()),
                   static_cast<std::streamsize>(rgb.size()));
        }
      }
      tc.encode_rgb(raw, (videos / (it.name + ".mp4")).string(),
                    static_cast<int>(spec.width), static_cast<int>(spec.height),
                    std::to_string(spec.fps), spec.crf);
      std::error_code ec;
      fs::remove(raw, ec);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  };

  const int n_workers = std::max(1, workers);
  if (n_workers == 1 || items.size() <= 1) {
    for (size_t k = 0; k < items.size(); ++k) render_one(k);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          const size_t k = next.fetch_add(1);
          if (k >= items.size()) return;
          render_one(k);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  for (size_t k = 0; k < items.size(); ++k)
    if (!errors[k].empty())
      throw TranscodeFailed("corpus video " + items[k].name + ": " + errors[k]);

  std::vector<VideoRecord> records;
  for (const Item& it : items) {
    VideoRecord r;
    r.path = (videos / (it.name + ".mp4")).string();
    r.label = it.fake ? Label::FAKE : Label::REAL;
    r.generator_tag = it.tag;
    r.frame_count = spec.frames_per_video;
    records.push_back(std::move(r));
  }

  SplitAssignment assigned = assign_splits(std::move(records), ratio, spec.seed);
  CorpusResult out;
  out.manifest = std::move(assigned.manifest);
  out.warnings = std::move(assigned.warnings);
  out.manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
  save_manifest(out.manifest, out.manifest_path);
  return out;
}

}  // namespace vtd
