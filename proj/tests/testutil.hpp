#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vtd/nn.hpp"
#include "vtd/rng.hpp"
#include "vtd/tensor.hpp"
#include "vtd/transcoder.hpp"
#include "vtd/types.hpp"

namespace vtdtest {

struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("vtdtest_" + tag + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
};

inline vtd::Tensor random_tensor(std::vector<int64_t> shape, vtd::Rng& rng,
                                 double lo = -1.0, double hi = 1.0) {
  vtd::Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t.data[i] = rng.uniform(lo, hi);
  return t;
}

inline vtd::Frame make_frame(int64_t h, int64_t w, int64_t index, vtd::Rng& rng) {
  vtd::Frame f;
  f.pixels = random_tensor({h, w, 3}, rng, 0.0, 1.0);
  f.timestamp_index = index;
  return f;
}

inline vtd::Clip make_random_clip(int64_t t, int64_t h, int64_t w, vtd::Rng& rng,
                                  vtd::Label label = vtd::Label::REAL) {
  vtd::Clip c;
  c.source_id = "clip" + std::to_string(rng.next_u64() % 1000);
  c.label = label;
  if (label == vtd::Label::FAKE) c.generator_tag = "testgen";
  for (int64_t i = 0; i < t; ++i) c.frames.push_back(make_frame(h, w, i, rng));
  return c;
}

// target for finite-difference checking: a tensor, its analytic gradient, and
// a label for diagnostics
struct GradTarget {
  std::string name;
  vtd::Tensor* value;
  const vtd::Tensor* grad;
};

struct GradCheckOutcome {
  double max_rel_err = 0.0;
  std::string worst;
};

// loss() must re-run the full forward path from current tensor values.
// Analytic gradients are read from the targets as captured before the call.
inline GradCheckOutcome finite_diff_check(const std::function<double()>& loss,
                                          const std::vector<GradTarget>& targets,
                                          double h = 1e-4) {
  GradCheckOutcome out;
  for (const auto& t : targets) {
    for (int64_t i = 0; i < t.value->numel(); ++i) {
      const double saved = t.value->data[i];
      t.value->data[i] = saved + h;
      const double lp = loss();
      t.value->data[i] = saved - h;
      const double lm = loss();
      t.value->data[i] = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = t.grad->data[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      const double rel = std::abs(numeric - analytic) / denom;
      if (rel > out.max_rel_err) {
        out.max_rel_err = rel;
        out.worst = t.name + "[" + std::to_string(i) + "] analytic=" +
                    std::to_string(analytic) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  return out;
}

inline vtd::Transcoder test_transcoder() {
  // VTD_TRANSCODER is set by ctest to the built vtdcodec; outside ctest the
  // sibling-path discovery applies
  return vtd::Transcoder();
}

}  // namespace vtdtest
