#include "vtd/global_branch.hpp"

#include <cmath>
#include <filesystem>

#include "vtd/errors.hpp"

namespace vtd {

// ---- FrameEmbedder -------------------------------------------------------------

FrameEmbedder::FrameEmbedder(const Config& cfg) : cfg_(cfg) {
  Rng rng = Rng(cfg.seed).fork("frame_embedder");
  const int64_t in = cfg.grid * cfg.grid * 3;
  proj_ = nn::normal_init({cfg.dim, in}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

FrameEmbedder::FrameEmbedder(const Config& cfg, Tensor projection)
    : cfg_(cfg), proj_(std::move(projection)) {
  if (proj_.dim(0) != cfg.dim || proj_.dim(1) != cfg.grid * cfg.grid * 3)
    throw ShapeMismatch("embedder projection shape inconsistent with config");
}

Tensor FrameEmbedder::embed_frame(const Frame& f) const {
  const int64_t g = cfg_.grid;
  const int64_t h = f.height(), w = f.width();
  if (h < g || w < g) throw ShapeMismatch("frame smaller than embedder grid");

  // grid-cell channel means; remainder rows/cols fold into the last cell
  Tensor pooled({g * g * 3});
  const int64_t cell_h = h / g, cell_w = w / g;
  for (int64_t gy = 0; gy < g; ++gy) {
    const int64_t y0 = gy * cell_h;
    const int64_t y1 = (gy == g - 1) ? h : y0 + cell_h;
    for (int64_t gx = 0; gx < g; ++gx) {
      const int64_t x0 = gx * cell_w;
      const int64_t x1 = (gx == g - 1) ? w : x0 + cell_w;
      double sum[3] = {0.0, 0.0, 0.0};
      for (int64_t y = y0; y < y1; ++y)
        for (int64_t x = x0; x < x1; ++x)
          for (int64_t c = 0; c < 3; ++c) sum[c] += f.pixels.at(y, x, c);
      const double inv = 1.0 / static_cast<double>((y1 - y0) * (x1 - x0));
      for (int64_t c = 0; c < 3; ++c)
        pooled.data[(gy * g + gx) * 3 + c] = sum[c] * inv;
    }
  }

  Tensor out({cfg_.dim});
  Eigen::Map<Eigen::VectorXd>(out.data.data(), cfg_.dim).noalias() =
      proj_.mat() * Eigen::Map<const Eigen::VectorXd>(pooled.data.data(), pooled.numel());
  return out;
}

EmbeddingSequence FrameEmbedder::embed_clip(const Clip& clip) const {
  const int64_t t = clip.length();
  EmbeddingSequence seq;
  seq.tokens = Tensor({t, cfg_.dim});
  for (int64_t i = 0; i < t; ++i) {
    const Tensor e = embed_frame(clip.frames[static_cast<size_t>(i)]);
    std::copy(e.data.data(), e.data.data() + cfg_.dim, seq.tokens.data.data() + i * cfg_.dim);
  }
  return seq;
}

void FrameEmbedder::save_into(Checkpoint& ck, const std::string& prefix) const {
  ck.add(prefix + "projection", proj_);
  ck.meta[prefix + "config"] = {
      {"type", "patch_projection"}, {"dim", cfg_.dim}, {"grid", cfg_.grid}, {"seed", cfg_.seed}};
}

FrameEmbedder FrameEmbedder::load_from(const Checkpoint& ck, const std::string& prefix) {
  const auto& j = ck.meta.at(prefix + "config");
  Config cfg;
  cfg.dim = j.at("dim").get<int64_t>();
  cfg.grid = j.at("grid").get<int64_t>();
  cfg.seed = j.at("seed").get<uint64_t>();
  return FrameEmbedder(cfg, ck.get(prefix + "projection"));
}

// ---- ExternalEmbeddingSource ------------------------------------------------------

ExternalEmbeddingSource::ExternalEmbeddingSource(std::string dir, int64_t dim)
    : dir_(std::move(dir)), dim_(dim) {}

EmbeddingSequence ExternalEmbeddingSource::embed_clip(const Clip& clip) const {
  const std::string path =
      (std::filesystem::path(dir_) / (clip.source_id + ".vtc")).string();
  const Checkpoint ck = Checkpoint::load(path);
  const Tensor& all = ck.get("embeddings");
  if (all.ndim() != 2 || all.dim(1) != dim_)
    throw ShapeMismatch("external embeddings for " + clip.source_id + " are not [frames, " +
                        std::to_string(dim_) + "]");
  const int64_t t = clip.length();
  const int64_t start = clip.frames.empty() ? 0 : clip.frames[0].timestamp_index;
  if (start + t > all.dim(0))
    throw ShapeMismatch("external embeddings too short for clip of " + clip.source_id);
  EmbeddingSequence seq;
  seq.tokens = Tensor({t, dim_});
  std::copy(all.data.data() + start * dim_, all.data.data() + (start + t) * dim_,
            seq.tokens.data.data());
  return seq;
}

// ---- TemporalTransformer ----------------------------------------------------------

TemporalTransformer::TemporalTransformer(const Config& cfg, Rng& rng) : cfg_(cfg) {
  pos_emb_ = nn::Param("transformer.pos", nn::normal_init({cfg.seq_len, cfg.dim}, 0.02, rng));
  layers_.reserve(static_cast<size_t>(cfg.layers));
  for (int64_t l = 0; l < cfg.layers; ++l)
    layers_.emplace_back("transformer.l" + std::to_string(l), cfg.dim, cfg.heads,
                         cfg.ff_dim, rng);
}

Tensor TemporalTransformer::add_positions(const Tensor& x) const {
  if (x.ndim() != 3 || x.dim(1) != cfg_.seq_len || x.dim(2) != cfg_.dim)
    throw ShapeMismatch("transformer input must be [B, " + std::to_string(cfg_.seq_len) +
                        ", " + std::to_string(cfg_.dim) + "]");
  Tensor y = x;
  if (!cfg_.positional) return y;
  const int64_t b = x.dim(0), t = cfg_.seq_len, d = cfg_.dim;
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t i = 0; i < t * d; ++i)
      y.data[bi * t * d + i] += pos_emb_.value.data[i];
  return y;
}

Tensor TemporalTransformer::forward(const Tensor& x) {
  in_shape_ = x.shape();
  Tensor t = add_positions(x);
  for (auto& layer : layers_) t = layer.forward(t);
  // mean pool over tokens
  const int64_t b = x.dim(0), tt = cfg_.seq_len, d = cfg_.dim;
  Tensor y({b, d});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ti = 0; ti < tt; ++ti)
      for (int64_t di = 0; di < d; ++di) y.at(bi, di) += t.at(bi, ti, di) / static_cast<double>(tt);
  return y;
}

Tensor TemporalTransformer::infer(const Tensor& x) const {
  Tensor t = add_positions(x);
  for (const auto& layer : layers_) t = layer.infer(t);
  const int64_t b = x.dim(0), tt = cfg_.seq_len, d = cfg_.dim;
  Tensor y({b, d});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ti = 0; ti < tt; ++ti)
      for (int64_t di = 0; di < d; ++di) y.at(bi, di) += t.at(bi, ti, di) / static_cast<double>(tt);
  return y;
}

Tensor TemporalTransformer::backward(const Tensor& gy) {
  const int64_t b = in_shape_[0], t = cfg_.seq_len, d = cfg_.dim;
  Tensor g({b, t, d});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ti = 0; ti < t; ++ti)
      for (int64_t di = 0; di < d; ++di)
        g.at(bi, ti, di) = gy.at(bi, di) / static_cast<double>(t);
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
  if (cfg_.positional) {
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t i = 0; i < t * d; ++i) pos_emb_.grad.data[i] += g.data[bi * t * d + i];
  }
  return g;
}

std::vector<nn::Param*> TemporalTransformer::params() {
  std::vector<nn::Param*> out;
  if (cfg_.positional) out.push_back(&pos_emb_);
  for (auto& layer : layers_) layer.collect(out);
  return out;
}

void TemporalTransformer::save_into(Checkpoint& ck, const std::string& prefix) const {
  auto* self = const_cast<TemporalTransformer*>(this);
  ck.add(prefix + pos_emb_.name, pos_emb_.value);
  std::vector<nn::Param*> ps;
  for (auto& layer : self->layers_) layer.collect(ps);
  for (nn::Param* p : ps) ck.add(prefix + p->name, p->value);
}

void TemporalTransformer::load_from(const Checkpoint& ck, const std::string& prefix) {
  pos_emb_.value = ck.get(prefix + pos_emb_.name);
  pos_emb_.zero_grad();
  std::vector<nn::Param*> ps;
  for (auto& layer : layers_) layer.collect(ps);
  for (nn::Param* p : ps) {
    const Tensor& t = ck.get(prefix + p->name);
    if (!t.same_shape(p->value))
      throw ShapeMismatch("checkpoint tensor shape mismatch for " + p->name);
    p->value = t;
    p->zero_grad();
  }
}

// ---- entry points ----------------------------------------------------------------

EmbeddingSequence embed_frames(const EmbeddingSource& e, const Clip& clip) {
  return e.embed_clip(clip);
}

Tensor temporal_transform(TemporalTransformer& t, const EmbeddingSequence& seq) {
  const Tensor x = seq.tokens.reshaped({1, seq.tokens.dim(0), seq.tokens.dim(1)});
  Tensor y = t.infer(x);
  return y.reshaped({y.dim(1)});
}

}  // namespace vtd
