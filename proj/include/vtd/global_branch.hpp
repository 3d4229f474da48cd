#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vtd/checkpoint.hpp"
#include "vtd/nn.hpp"
#include "vtd/types.hpp"

namespace vtd {

struct EmbeddingSequence {
  Tensor tokens;  // [T, D], row t embeds frame t
};

// Per-frame embedding provider. Implementations must be deterministic, frozen
// (no gradients ever flow through them) and per-frame independent.
class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  virtual int64_t dim() const = 0;
  virtual EmbeddingSequence embed_clip(const Clip& clip) const = 0;
};

// Desk-scale stand-in for a pretrained image encoder: mean-pools the frame on
// a fixed grid and applies a seed-generated random projection. Frozen by
// construction; a real pretrained encoder slots in through EmbeddingSource
// (or precomputed embedding files via ExternalEmbeddingSource).
class FrameEmbedder : public EmbeddingSource {
 public:
  struct Config {
    int64_t dim = 128;
    int64_t grid = 8;
    uint64_t seed = 0x5eedbee7;
  };

  FrameEmbedder() = default;  // placeholder; assign before use
  explicit FrameEmbedder(const Config& cfg);
  FrameEmbedder(const Config& cfg, Tensor projection);  // from checkpoint

  int64_t dim() const override { return cfg_.dim; }
  Tensor embed_frame(const Frame& f) const;
  EmbeddingSequence embed_clip(const Clip& clip) const override;

  const Tensor& projection() const { return proj_; }
  const Config& config() const { return cfg_; }

  void save_into(Checkpoint& ck, const std::string& prefix) const;
  static FrameEmbedder load_from(const Checkpoint& ck, const std::string& prefix);

 private:
  Config cfg_;
  Tensor proj_;  // [dim, grid*grid*3]
};

// Reads externally produced per-frame embeddings: <dir>/<source_id>.vtc with
// one tensor "embeddings" of shape [frame_count, D]; clip rows are selected by
// the frames' timestamp indices.
class ExternalEmbeddingSource : public EmbeddingSource {
 public:
  ExternalEmbeddingSource(std::string dir, int64_t dim);

  int64_t dim() const override { return dim_; }
  EmbeddingSequence embed_clip(const Clip& clip) const override;

 private:
  std::string dir_;
  int64_t dim_;
};

// F_t: learned positional embeddings, transformer encoder stack, mean pool
// over output tokens. Trainable.
class TemporalTransformer {
 public:
  struct Config {
    int64_t seq_len = kDefaultClipLength;
    int64_t dim = 128;
    int64_t heads = 4;
    int64_t layers = 2;
    int64_t ff_dim = 256;
    bool positional = true;  // switchable for the permutation self-test
  };

  TemporalTransformer() = default;
  TemporalTransformer(const Config& cfg, Rng& rng);

  // x: [B, T, D] -> [B, C] (C == D)
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;
  std::vector<nn::Param*> params();

  void save_into(Checkpoint& ck, const std::string& prefix) const;
  void load_from(const Checkpoint& ck, const std::string& prefix);

  const Config& config() const { return cfg_; }

 private:
  Tensor add_positions(const Tensor& x) const;

  Config cfg_;
  nn::Param pos_emb_;  // [T, D]
  std::vector<nn::TransformerLayer> layers_;
  std::vector<int64_t> in_shape_;
};

// Eq-style entry points used by the pipeline.
EmbeddingSequence embed_frames(const EmbeddingSource& e, const Clip& clip);
Tensor temporal_transform(TemporalTransformer& t, const EmbeddingSequence& seq);

}  // namespace vtd
