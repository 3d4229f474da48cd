#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "testutil.hpp"
#include "vtd/local_branch.hpp"
#include "vtd/synth.hpp"

using namespace vtd;

namespace {

// brute-force scalar-loop mean, independent of the tensor code paths
Tensor loop_mean(const std::vector<PredictionErrorMap>& maps) {
  const auto& shape = maps[0].residual.shape();
  Tensor out(shape);
  for (int64_t i = 0; i < out.numel(); ++i) {
    double s = 0.0;
    for (const auto& m : maps) s += m.residual.data[i];
    out.data[i] = s / static_cast<double>(maps.size());
  }
  return out;
}

std::vector<Clip> static_clips(int count, int64_t t, uint64_t seed) {
  // every frame identical within a clip
  std::vector<Clip> clips;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    Clip c;
    c.source_id = "static" + std::to_string(i);
    c.label = Label::REAL;
    Frame base = vtdtest::make_frame(32, 32, 0, rng);
    for (int64_t k = 0; k < t; ++k) {
      Frame f = base;
      f.timestamp_index = k;
      c.frames.push_back(std::move(f));
    }
    clips.push_back(std::move(c));
  }
  return clips;
}

// constant-velocity translating square over a textured background
std::vector<Clip> translating_clips(int count, int64_t t, uint64_t seed) {
  SynthSpec spec;
  spec.height = 32;
  spec.width = 32;
  spec.frames_per_video = t;
  spec.seed = seed;
  std::vector<Clip> clips;
  for (int i = 0; i < count; ++i) {
    Clip c;
    c.source_id = "move" + std::to_string(i);
    c.label = Label::REAL;
    c.frames = gen_real_video(spec, i);
    clips.push_back(std::move(c));
  }
  return clips;
}

double copy_last_mae(const Clip& c) {
  // baseline: predict f_{t+2} as f_{t+1}
  double total = 0.0;
  int64_t n = 0;
  for (size_t t = 0; t + 2 < c.frames.size(); ++t) {
    total += (c.frames[t + 2].pixels.data - c.frames[t + 1].pixels.data).abs().sum();
    n += c.frames[t + 2].pixels.numel();
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_CASE("aggregation equals the loop oracle for all counts 1..30") {
  Rng rng(31);
  for (int count = 1; count <= 30; ++count) {
    std::vector<PredictionErrorMap> maps;
    for (int i = 0; i < count; ++i)
      maps.push_back({vtdtest::random_tensor({4, 4, 3}, rng, -2.0, 2.0), i + 1});
    const Tensor got = aggregate_prediction_errors(maps);
    const Tensor want = loop_mean(maps);
    REQUIRE((got.data - want.data).abs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("aggregation spec examples: zeros and single map") {
  std::vector<PredictionErrorMap> zeros;
  for (int i = 0; i < 5; ++i) zeros.push_back({Tensor({4, 4, 3}), i + 1});
  CHECK(aggregate_prediction_errors(zeros).data.abs().maxCoeff() == 0.0);

  Rng rng(32);
  std::vector<PredictionErrorMap> one{{vtdtest::random_tensor({4, 4, 3}, rng), 1}};
  CHECK(aggregate_prediction_errors(one).data.isApprox(one[0].residual.data));
}

TEST_CASE("aggregation is linear in scaling and invariant to ordering") {
  Rng rng(33);
  std::vector<PredictionErrorMap> maps;
  for (int i = 0; i < 5; ++i)
    maps.push_back({vtdtest::random_tensor({6, 5, 3}, rng, -1.0, 1.0), i + 1});

  const Tensor base = aggregate_prediction_errors(maps);

  const double a = 2.75;
  std::vector<PredictionErrorMap> scaled = maps;
  for (auto& m : scaled) m.residual.data *= a;
  const Tensor scaled_agg = aggregate_prediction_errors(scaled);
  CHECK((scaled_agg.data - a * base.data).abs().maxCoeff() < 1e-6);

  std::vector<PredictionErrorMap> shuffled = maps;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[0], shuffled[2]);
  const Tensor perm_agg = aggregate_prediction_errors(shuffled);
  CHECK((perm_agg.data - base.data).abs().maxCoeff() < 1e-12);
}

TEST_CASE("aggregation rejects empty input and mismatched shapes") {
  CHECK_THROWS_AS(aggregate_prediction_errors({}), EmptySequence);
  Rng rng(34);
  std::vector<PredictionErrorMap> bad{{vtdtest::random_tensor({4, 4, 3}, rng), 1},
                                      {vtdtest::random_tensor({5, 4, 3}, rng), 2}};
  CHECK_THROWS_AS(aggregate_prediction_errors(bad), ShapeMismatch);
}

TEST_CASE("compute_prediction_errors yields exactly T-2 maps for T in [3,32]") {
  Rng rng(35);
  FramePredictor pred(FramePredictor::Arch{8}, rng);
  pred.freeze();
  for (int64_t t : {int64_t{3}, int64_t{4}, int64_t{7}, int64_t{16}, int64_t{32}}) {
    const Clip c = vtdtest::make_random_clip(t, 16, 16, rng);
    const auto maps = compute_prediction_errors(pred, c);
    REQUIRE(static_cast<int64_t>(maps.size()) == t - 2);
    for (size_t k = 0; k < maps.size(); ++k)
      REQUIRE(maps[k].pair_index == static_cast<int64_t>(k) + 1);
  }
  const Clip too_short = vtdtest::make_random_clip(2, 16, 16, rng);
  CHECK_THROWS_AS(compute_prediction_errors(pred, too_short), ClipTooShort);
}

TEST_CASE("prediction errors are residual = predicted - actual") {
  Rng rng(36);
  FramePredictor pred(FramePredictor::Arch{8}, rng);
  pred.freeze();
  const Clip c = vtdtest::make_random_clip(3, 16, 16, rng);
  const Tensor predicted = predict_frame(pred, c.frames[0], c.frames[1]);
  const auto maps = compute_prediction_errors(pred, c);
  Tensor want = predicted;
  want.data -= c.frames[2].pixels.data;
  CHECK((maps[0].residual.data - want.data).abs().maxCoeff() < 1e-12);
}

TEST_CASE("predict_frame preconditions and determinism") {
  Rng rng(37);
  FramePredictor unfrozen(FramePredictor::Arch{8}, rng);
  const Frame a = vtdtest::make_frame(16, 16, 0, rng);
  const Frame b = vtdtest::make_frame(16, 16, 1, rng);
  CHECK_THROWS_AS(predict_frame(unfrozen, a, b), Error);

  unfrozen.freeze();
  const Frame c = vtdtest::make_frame(16, 32, 1, rng);
  CHECK_THROWS_AS(predict_frame(unfrozen, a, c), ShapeMismatch);

  const Tensor y1 = predict_frame(unfrozen, a, b);
  const Tensor y2 = predict_frame(unfrozen, a, b);
  CHECK(y1.bitwise_equal(y2));
  CHECK(y1.shape() == a.pixels.shape());
}

TEST_CASE("training on static video drives held-out error to near zero") {
  PredictorTrainConfig cfg;
  cfg.max_epochs = 4;
  cfg.seed = 5;
  cfg.base_channels = 8;
  cfg.max_samples_per_epoch = 128;
  PredictorTrainSummary sum;
  const FramePredictor pred =
      train_frame_predictor(static_clips(12, 7, 100), static_clips(4, 7, 200), cfg, &sum);
  CHECK(pred.frozen());
  CHECK(sum.best_val_mae <= 0.01);

  // two identical frames into the static-trained predictor reproduce the frame
  Rng rng(38);
  const Frame f = vtdtest::make_frame(32, 32, 0, rng);
  const Tensor out = predict_frame(pred, f, f);
  const double mae = (out.data - f.pixels.data).abs().mean();
  CHECK(mae <= 0.02);
}

TEST_CASE("training rejects any FAKE clip in the stream") {
  auto clips = static_clips(4, 7, 300);
  clips[2].label = Label::FAKE;
  clips[2].generator_tag = "gen";
  PredictorTrainConfig cfg;
  cfg.max_epochs = 1;
  CHECK_THROWS_AS(train_frame_predictor(clips, {}, cfg, nullptr), LabelLeakError);
}

TEST_CASE("trained predictor beats the copy-last-frame baseline on constant motion") {
  const auto train = translating_clips(40, 12, 41);
  const auto val = translating_clips(6, 12, 42);
  PredictorTrainConfig cfg;
  cfg.max_epochs = 30;
  cfg.patience = 30;
  cfg.seed = 6;
  cfg.learning_rate = 2e-3;
  cfg.base_channels = 16;
  cfg.max_samples_per_epoch = 400;
  PredictorTrainSummary sum;
  const FramePredictor pred = train_frame_predictor(train, val, cfg, &sum);

  const auto probe = translating_clips(6, 12, 43);
  double model_mae = 0.0, baseline_mae = 0.0;
  for (const auto& clip : probe) {
    const auto maps = compute_prediction_errors(pred, clip);
    double total = 0.0;
    int64_t n = 0;
    for (const auto& m : maps) {
      total += m.residual.data.abs().sum();
      n += m.residual.numel();
    }
    model_mae += total / static_cast<double>(n);
    baseline_mae += copy_last_mae(clip);
  }
  CHECK(model_mae < baseline_mae);
}

TEST_CASE("predictor checkpoint round-trips bitwise") {
  Rng rng(44);
  FramePredictor pred(FramePredictor::Arch{8}, rng);
  pred.freeze();
  Checkpoint ck;
  ck.meta["version"] = 1;
  pred.save_into(ck, "p.");

  FramePredictor back(FramePredictor::Arch{8}, rng);
  back.load_from(ck, "p.");
  back.freeze();
  Rng rx(45);
  const Frame a = vtdtest::make_frame(16, 16, 0, rx), b = vtdtest::make_frame(16, 16, 1, rx);
  CHECK(predict_frame(pred, a, b).bitwise_equal(predict_frame(back, a, b)));
}

TEST_CASE("local encoder emits finite C-vectors of the configured width") {
  Rng rng(46);
  LocalEncoder enc(128, rng);
  Tensor zero({2, 3, 64, 64});
  Tensor y = enc.infer(zero);
  REQUIRE(y.shape() == std::vector<int64_t>{2, 128});
  CHECK(y.all_finite());

  LocalEncoder small(32, rng);
  CHECK(small.infer(zero).dim(1) == 32);

  // distinct maps produce distinct features on a random init
  Tensor a = vtdtest::random_tensor({1, 3, 64, 64}, rng, -0.5, 0.5);
  Tensor b = vtdtest::random_tensor({1, 3, 64, 64}, rng, -0.5, 0.5);
  const Tensor fa = enc.infer(a), fb = enc.infer(b);
  CHECK((fa.data - fb.data).abs().maxCoeff() > 1e-9);
}
