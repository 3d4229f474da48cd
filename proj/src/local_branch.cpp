#include "vtd/local_branch.hpp"

#include <algorithm>
#include <cmath>

#include "vtd/errors.hpp"

namespace vtd {

Tensor hwc_to_chw(const Tensor& hwc) {
  const int64_t h = hwc.dim(0), w = hwc.dim(1), c = hwc.dim(2);
  Tensor out({c, h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t ch = 0; ch < c; ++ch) out.at(ch, y, x) = hwc.at(y, x, ch);
  return out;
}

Tensor chw_to_hwc(const Tensor& chw) {
  const int64_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  Tensor out({h, w, c});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) out.at(y, x, ch) = chw.at(ch, y, x);
  return out;
}

// ---- FramePredictor -----------------------------------------------------------

FramePredictor::FramePredictor(const Arch& a, Rng& rng) : arch(a) {
  const int64_t b = a.base_channels;
  c1_ = nn::Conv2d("pred.c1", 6, b, 3, 1, 1, rng);
  c2_ = nn::Conv2d("pred.c2", b, b, 3, 2, 1, rng);
  c3_ = nn::Conv2d("pred.c3", b, 2 * b, 3, 2, 1, rng);
  c4_ = nn::Conv2d("pred.c4", 2 * b, b, 3, 1, 1, rng);
  c5_ = nn::Conv2d("pred.c5", b, b, 3, 1, 1, rng);
  c6_ = nn::Conv2d("pred.c6", b, 3, 3, 1, 1, rng);
}

Tensor FramePredictor::forward(const Tensor& x) {
  if (x.ndim() != 4 || x.dim(1) != 6) throw ShapeMismatch("predictor input must be [N,6,H,W]");
  const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  // second stacked frame, kept for the residual connection
  second_frame_ = Tensor({n, 3, h, w});
  for (int64_t ni = 0; ni < n; ++ni)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < h * w; ++i)
        second_frame_.data[(ni * 3 + c) * h * w + i] = x.data[(ni * 6 + 3 + c) * h * w + i];

  Tensor t = r1_.forward(c1_.forward(x));
  t = r2_.forward(c2_.forward(t));
  t = r3_.forward(c3_.forward(t));
  t = r4_.forward(c4_.forward(up1_.forward(t)));
  t = r5_.forward(c5_.forward(up2_.forward(t)));
  t = c6_.forward(t);
  t.data += second_frame_.data;
  return t;
}

Tensor FramePredictor::infer(const Tensor& x) const {
  if (x.ndim() != 4 || x.dim(1) != 6) throw ShapeMismatch("predictor input must be [N,6,H,W]");
  const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  Tensor t = r1_.infer(c1_.infer(x));
  t = r2_.infer(c2_.infer(t));
  t = r3_.infer(c3_.infer(t));
  t = r4_.infer(c4_.infer(up1_.infer(t)));
  t = r5_.infer(c5_.infer(up2_.infer(t)));
  t = c6_.infer(t);
  for (int64_t ni = 0; ni < n; ++ni)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < h * w; ++i)
        t.data[(ni * 3 + c) * h * w + i] += x.data[(ni * 6 + 3 + c) * h * w + i];
  return t;
}

Tensor FramePredictor::backward(const Tensor& gy) {
  Tensor g = c6_.backward(gy);
  g = up2_.backward(c5_.backward(r5_.backward(g)));
  g = up1_.backward(c4_.backward(r4_.backward(g)));
  g = c3_.backward(r3_.backward(g));
  g = c2_.backward(r2_.backward(g));
  Tensor gx = c1_.backward(r1_.backward(g));
  // residual path: gradient w.r.t. the second stacked frame
  const int64_t n = gx.dim(0), h = gx.dim(2), w = gx.dim(3);
  for (int64_t ni = 0; ni < n; ++ni)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < h * w; ++i)
        gx.data[(ni * 6 + 3 + c) * h * w + i] += gy.data[(ni * 3 + c) * h * w + i];
  return gx;
}

std::vector<nn::Param*> FramePredictor::params() {
  std::vector<nn::Param*> out;
  c1_.collect(out);
  c2_.collect(out);
  c3_.collect(out);
  c4_.collect(out);
  c5_.collect(out);
  c6_.collect(out);
  return out;
}

void FramePredictor::save_into(Checkpoint& ck, const std::string& prefix) const {
  auto* self = const_cast<FramePredictor*>(this);
  for (nn::Param* p : self->params()) ck.add(prefix + p->name, p->value);
}

void FramePredictor::load_from(const Checkpoint& ck, const std::string& prefix) {
  for (nn::Param* p : params()) {
    const Tensor& t = ck.get(prefix + p->name);
    if (!t.same_shape(p->value))
      throw ShapeMismatch("checkpoint tensor shape mismatch for " + p->name);
    p->value = t;
    p->zero_grad();
  }
}

// ---- training -------------------------------------------------------------------

namespace {

struct Triple {
  const Clip* clip;
  int64_t t;
};

void fill_pair_input(Tensor& x, int64_t slot, const Frame& a, const Frame& b) {
  const int64_t h = a.height(), w = a.width();
  const Tensor ca = hwc_to_chw(a.pixels), cb = hwc_to_chw(b.pixels);
  double* dst = x.data.data() + slot * 6 * h * w;
  std::copy(ca.data.data(), ca.data.data() + 3 * h * w, dst);
  std::copy(cb.data.data(), cb.data.data() + 3 * h * w, dst + 3 * h * w);
}

void check_real_only(const std::vector<Clip>& clips) {
  for (const auto& c : clips)
    if (c.label != Label::REAL)
      throw LabelLeakError("frame predictor training saw a FAKE clip from " + c.source_id);
}

std::vector<Triple> collect_triples(const std::vector<Clip>& clips) {
  std::vector<Triple> out;
  for (const auto& c : clips) {
    if (c.length() < 3) continue;
    for (int64_t t = 0; t + 2 < c.length(); ++t) out.push_back(Triple{&c, t});
  }
  return out;
}

double eval_mae(const FramePredictor& p, const std::vector<Triple>& triples) {
  if (triples.empty()) return 0.0;
  double total = 0.0;
  int64_t count = 0;
  const int64_t batch = 16;
  for (size_t at = 0; at < triples.size(); at += batch) {
    const int64_t n = std::min<int64_t>(batch, static_cast<int64_t>(triples.size() - at));
    const Frame& f0 = triples[at].clip->frames[static_cast<size_t>(triples[at].t)];
    Tensor x({n, 6, f0.height(), f0.width()});
    for (int64_t i = 0; i < n; ++i) {
      const Triple& tr = triples[at + static_cast<size_t>(i)];
      fill_pair_input(x, i, tr.clip->frames[static_cast<size_t>(tr.t)],
                      tr.clip->frames[static_cast<size_t>(tr.t + 1)]);
    }
    Tensor pred = p.infer(x);
    for (int64_t i = 0; i < n; ++i) {
      const Triple& tr = triples[at + static_cast<size_t>(i)];
      const Tensor target = hwc_to_chw(tr.clip->frames[static_cast<size_t>(tr.t + 2)].pixels);
      const int64_t m = target.numel();
      for (int64_t k = 0; k < m; ++k)
        total += std::abs(pred.data[i * m + k] - target.data[k]);
      count += m;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace

FramePredictor train_frame_predictor(const std::vector<Clip>& train_clips,
                                     const std::vector<Clip>& val_clips,
                                     const PredictorTrainConfig& cfg,
                                     PredictorTrainSummary* summary) {
  check_real_only(train_clips);
  check_real_only(val_clips);

  std::vector<Triple> train = collect_triples(train_clips);
  std::vector<Triple> val = collect_triples(val_clips);
  if (train.empty()) throw Error("Precondition", "no trainable triples in predictor input");

  Rng rng = Rng(cfg.seed).fork("frame_predictor");
  FramePredictor pred(FramePredictor::Arch{cfg.base_channels}, rng);
  nn::Adam opt(cfg.learning_rate);
  opt.attach(pred.params());

  PredictorTrainSummary local;
  PredictorTrainSummary& sum = summary ? *summary : local;

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params;
  int since_best = 0;

  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    const int64_t budget =
        std::min<int64_t>(static_cast<int64_t>(order.size()), cfg.max_samples_per_epoch);

    double train_mae = 0.0;
    int64_t seen = 0;
    for (int64_t at = 0; at < budget; at += cfg.batch_size) {
      const int64_t n = std::min<int64_t>(cfg.batch_size, budget - at);
      const Triple& first = train[order[static_cast<size_t>(at)]];
      const int64_t h = first.clip->frames[0].height(), w = first.clip->frames[0].width();
      Tensor x({n, 6, h, w});
      Tensor target({n, 3, h, w});
      for (int64_t i = 0; i < n; ++i) {
        const Triple& tr = train[order[static_cast<size_t>(at + i)]];
        fill_pair_input(x, i, tr.clip->frames[static_cast<size_t>(tr.t)],
                        tr.clip->frames[static_cast<size_t>(tr.t + 1)]);
        const Tensor t2 = hwc_to_chw(tr.clip->frames[static_cast<size_t>(tr.t + 2)].pixels);
        std::copy(t2.data.data(), t2.data.data() + t2.numel(),
                  target.data.data() + i * 3 * h * w);
      }
      opt.zero_grad();
      Tensor out = pred.forward(x);
      Tensor diff = out;
      diff.data -= target.data;
      train_mae += diff.data.abs().sum();
      seen += diff.numel();
      // L1 loss gradient
      Tensor g(diff.shape());
      g.data = diff.data.sign() / static_cast<double>(diff.numel());
      pred.backward(g);
      opt.step();
    }
    train_mae /= static_cast<double>(std::max<int64_t>(seen, 1));

    const double val_mae = val.empty() ? train_mae : eval_mae(pred, val);
    sum.epoch_log.emplace_back(train_mae, val_mae);
    sum.epochs_run = epoch + 1;

    if (val_mae < best_val - 1e-9) {
      best_val = val_mae;
      best_params.clear();
      for (nn::Param* p : pred.params()) best_params.push_back(p->value);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      sum.warnings.push_back("NonConvergence: validation error stalled for " +
                             std::to_string(cfg.patience) + " epochs");
      break;
    }
  }

  if (!best_params.empty()) {
    auto params = pred.params();
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  }
  sum.best_val_mae = best_val;
  pred.freeze();
  return pred;
}

// ---- prediction errors -------------------------------------------------------------

Tensor predict_frame(const FramePredictor& p, const Frame& f_t, const Frame& f_next) {
  if (!p.frozen()) throw Error("Precondition", "predictor must be frozen before inference");
  if (!f_t.pixels.same_shape(f_next.pixels))
    throw ShapeMismatch("predict_frame inputs differ in shape");
  const int64_t h = f_t.height(), w = f_t.width();
  Tensor x({1, 6, h, w});
  fill_pair_input(x, 0, f_t, f_next);
  Tensor out = p.infer(x);
  return chw_to_hwc(out.reshaped({3, h, w}));
}

std::vector<PredictionErrorMap> compute_prediction_errors(const FramePredictor& p,
                                                          const Clip& clip) {
  if (clip.length() < 3)
    throw ClipTooShort("need at least 3 frames, got " + std::to_string(clip.length()));
  if (!p.frozen()) throw Error("Precondition", "predictor must be frozen");
  const int64_t h = clip.frames[0].height(), w = clip.frames[0].width();
  const int64_t n = clip.length() - 2;
  Tensor x({n, 6, h, w});
  for (int64_t t = 0; t < n; ++t)
    fill_pair_input(x, t, clip.frames[static_cast<size_t>(t)],
                    clip.frames[static_cast<size_t>(t + 1)]);
  Tensor pred = p.infer(x);
  std::vector<PredictionErrorMap> maps;
  maps.reserve(static_cast<size_t>(n));
  for (int64_t t = 0; t < n; ++t) {
    Tensor chw({3, h, w});
    std::copy(pred.data.data() + t * 3 * h * w, pred.data.data() + (t + 1) * 3 * h * w,
              chw.data.data());
    PredictionErrorMap m;
    m.residual = chw_to_hwc(chw);
    m.residual.data -= clip.frames[static_cast<size_t>(t + 2)].pixels.data;
    m.pair_index = t + 1;  // 1-based over the T-2 prediction targets
    maps.push_back(std::move(m));
  }
  return maps;
}

Tensor aggregate_prediction_errors(const std::vector<PredictionErrorMap>& maps) {
  if (maps.empty()) throw EmptySequence("no prediction error maps to aggregate");
  Tensor acc = maps[0].residual;
  for (size_t i = 1; i < maps.size(); ++i) {
    if (!maps[i].residual.same_shape(acc))
      throw ShapeMismatch("prediction error maps differ in shape");
    acc.data += maps[i].residual.data;
  }
  acc.data /= static_cast<double>(maps.size());
  return acc;
}

// ---- LocalEncoder --------------------------------------------------------------------

LocalEncoder::LocalEncoder(int64_t out_dim, Rng& rng) : out_dim_(out_dim) {
  c1_ = nn::Conv2d("local.c1", 3, 16, 3, 2, 1, rng);
  c2_ = nn::Conv2d("local.c2", 16, 32, 3, 2, 1, rng);
  c3_ = nn::Conv2d("local.c3", 32, 64, 3, 2, 1, rng);
  c4_ = nn::Conv2d("local.c4", 64, out_dim, 3, 2, 1, rng);
}

Tensor LocalEncoder::forward(const Tensor& x) {
  Tensor t = r1_.forward(c1_.forward(x));
  t = r2_.forward(c2_.forward(t));
  t = r3_.forward(c3_.forward(t));
  t = r4_.forward(c4_.forward(t));
  return pool_.forward(t);
}

Tensor LocalEncoder::infer(const Tensor& x) const {
  Tensor t = r1_.infer(c1_.infer(x));
  t = r2_.infer(c2_.infer(t));
  t = r3_.infer(c3_.infer(t));
  t = r4_.infer(c4_.infer(t));
  return pool_.infer(t);
}

Tensor LocalEncoder::backward(const Tensor& gy) {
  Tensor g = pool_.backward(gy);
  g = c4_.backward(r4_.backward(g));
  g = c3_.backward(r3_.backward(g));
  g = c2_.backward(r2_.backward(g));
  return c1_.backward(r1_.backward(g));
}

std::vector<nn::Param*> LocalEncoder::params() {
  std::vector<nn::Param*> out;
  c1_.collect(out);
  c2_.collect(out);
  c3_.collect(out);
  c4_.collect(out);
  return out;
}

void LocalEncoder::save_into(Checkpoint& ck, const std::string& prefix) const {
  auto* self = const_cast<LocalEncoder*>(this);
  for (nn::Param* p : self->params()) ck.add(prefix + p->name, p->value);
}

void LocalEncoder::load_from(const Checkpoint& ck, const std::string& prefix) {
  for (nn::Param* p : params()) {
    const Tensor& t = ck.get(prefix + p->name);
    if (!t.same_shape(p->value))
      throw ShapeMismatch("checkpoint tensor shape mismatch for " + p->name);
    p->value = t;
    p->zero_grad();
  }
}

}  // namespace vtd
