#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "testutil.hpp"
#include "vtd/global_branch.hpp"

using namespace vtd;

namespace {

double cosine(const Tensor& a, const Tensor& b) {
  const double num = (a.data * b.data).sum();
  return num / std::sqrt(a.data.square().sum() * b.data.square().sum());
}

}  // namespace

TEST_CASE("embedding a clip of identical frames yields identical rows") {
  Rng rng(51);
  FrameEmbedder emb(FrameEmbedder::Config{64, 8, 9});
  Clip c;
  c.source_id = "same";
  const Frame base = vtdtest::make_frame(32, 32, 0, rng);
  for (int i = 0; i < 7; ++i) {
    Frame f = base;
    f.timestamp_index = i;
    c.frames.push_back(std::move(f));
  }
  const EmbeddingSequence seq = emb.embed_clip(c);
  REQUIRE(seq.tokens.shape() == std::vector<int64_t>{7, 64});
  for (int t = 1; t < 7; ++t)
    for (int d = 0; d < 64; ++d) REQUIRE(seq.tokens.at(t, d) == seq.tokens.at(0, d));
}

TEST_CASE("per-frame independence: permuting frames permutes rows identically") {
  Rng rng(52);
  FrameEmbedder emb(FrameEmbedder::Config{32, 8, 9});
  Clip c = vtdtest::make_random_clip(5, 16, 16, rng);
  const EmbeddingSequence seq = emb.embed_clip(c);

  Clip perm = c;
  std::swap(perm.frames[0], perm.frames[4]);
  std::swap(perm.frames[1], perm.frames[3]);
  const EmbeddingSequence pseq = emb.embed_clip(perm);
  for (int d = 0; d < 32; ++d) {
    REQUIRE(pseq.tokens.at(0, d) == seq.tokens.at(4, d));
    REQUIRE(pseq.tokens.at(3, d) == seq.tokens.at(1, d));
    REQUIRE(pseq.tokens.at(2, d) == seq.tokens.at(2, d));
  }
}

TEST_CASE("visually distinct frames embed with cosine similarity below 0.999") {
  Rng rng(53);
  FrameEmbedder emb(FrameEmbedder::Config{128, 8, 9});
  Frame dark = vtdtest::make_frame(64, 64, 0, rng);
  dark.pixels.data *= 0.2;
  Frame bright = vtdtest::make_frame(64, 64, 0, rng);
  bright.pixels.data = 1.0 - 0.3 * bright.pixels.data;
  CHECK(cosine(emb.embed_frame(dark), emb.embed_frame(bright)) < 0.999);
}

TEST_CASE("embedder is frozen by construction: same config, same projection") {
  FrameEmbedder a(FrameEmbedder::Config{64, 8, 1234});
  FrameEmbedder b(FrameEmbedder::Config{64, 8, 1234});
  CHECK(a.projection().bitwise_equal(b.projection()));
  FrameEmbedder c(FrameEmbedder::Config{64, 8, 1235});
  CHECK(!a.projection().bitwise_equal(c.projection()));
}

TEST_CASE("embedder checkpoint round-trip") {
  vtdtest::TempDir dir("emb");
  FrameEmbedder emb(FrameEmbedder::Config{48, 8, 77});
  Checkpoint ck;
  ck.meta["version"] = 1;
  emb.save_into(ck, "e.");
  ck.save(dir.file("e.vtc"));
  const FrameEmbedder back = FrameEmbedder::load_from(Checkpoint::load(dir.file("e.vtc")), "e.");
  CHECK(back.projection().bitwise_equal(emb.projection()));
  CHECK(back.config().dim == 48);
}

TEST_CASE("external embedding files bypass the embedder") {
  vtdtest::TempDir dir("ext");
  Rng rng(54);
  const Tensor all = vtdtest::random_tensor({24, 16}, rng);
  Checkpoint ck;
  ck.meta["version"] = 1;
  ck.add("embeddings", all);
  ck.save(dir.file("vidx.vtc"));

  Clip c = vtdtest::make_random_clip(7, 16, 16, rng);
  c.source_id = "vidx";
  for (int i = 0; i < 7; ++i) c.frames[static_cast<size_t>(i)].timestamp_index = 5 + i;

  ExternalEmbeddingSource src(dir.str(), 16);
  const EmbeddingSequence seq = src.embed_clip(c);
  REQUIRE(seq.tokens.shape() == std::vector<int64_t>{7, 16});
  for (int t = 0; t < 7; ++t)
    for (int d = 0; d < 16; ++d) REQUIRE(seq.tokens.at(t, d) == all.at(5 + t, d));

  // too-short embedding files are rejected
  for (int i = 0; i < 7; ++i) c.frames[static_cast<size_t>(i)].timestamp_index = 20 + i;
  CHECK_THROWS_AS(src.embed_clip(c), ShapeMismatch);
}

TEST_CASE("temporal transform: zero tokens give a finite vector") {
  Rng rng(55);
  TemporalTransformer::Config cfg;
  cfg.seq_len = 7;
  cfg.dim = 32;
  cfg.heads = 4;
  cfg.layers = 2;
  cfg.ff_dim = 64;
  TemporalTransformer tr(cfg, rng);
  Tensor zero({1, 7, 32});
  const Tensor y = tr.infer(zero);
  REQUIRE(y.shape() == std::vector<int64_t>{1, 32});
  CHECK(y.all_finite());
}

TEST_CASE("positional switch: without positions output is permutation-invariant") {
  Rng rng(56);
  TemporalTransformer::Config cfg;
  cfg.seq_len = 5;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.ff_dim = 32;
  cfg.positional = false;
  TemporalTransformer tr(cfg, rng);

  Tensor x = vtdtest::random_tensor({1, 5, 16}, rng);
  Tensor perm = x;
  for (int d = 0; d < 16; ++d) {
    std::swap(perm.data[0 * 16 + d], perm.data[4 * 16 + d]);
    std::swap(perm.data[1 * 16 + d], perm.data[2 * 16 + d]);
  }
  const Tensor y1 = tr.infer(x), y2 = tr.infer(perm);
  CHECK((y1.data - y2.data).abs().maxCoeff() < 1e-10);
}

TEST_CASE("with positions enabled, reversing token order changes the output") {
  Rng rng(57);
  TemporalTransformer::Config cfg;
  cfg.seq_len = 5;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.ff_dim = 32;
  TemporalTransformer tr(cfg, rng);

  Tensor x = vtdtest::random_tensor({1, 5, 16}, rng);
  Tensor rev({1, 5, 16});
  for (int t = 0; t < 5; ++t)
    for (int d = 0; d < 16; ++d) rev.data[t * 16 + d] = x.data[(4 - t) * 16 + d];
  const Tensor y1 = tr.infer(x), y2 = tr.infer(rev);
  CHECK((y1.data - y2.data).matrix().norm() > 1e-6);
}

TEST_CASE("inference is deterministic and batch rows are independent") {
  Rng rng(58);
  TemporalTransformer::Config cfg;
  cfg.seq_len = 4;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.ff_dim = 32;
  TemporalTransformer tr(cfg, rng);

  Tensor x = vtdtest::random_tensor({3, 4, 16}, rng);
  const Tensor y = tr.infer(x);
  CHECK(tr.infer(x).bitwise_equal(y));

  // row 1 alone equals row 1 of the batch
  Tensor single({1, 4, 16});
  std::copy(x.data.data() + 1 * 4 * 16, x.data.data() + 2 * 4 * 16, single.data.data());
  const Tensor ys = tr.infer(single);
  for (int d = 0; d < 16; ++d)
    CHECK(ys.at(0, d) == doctest::Approx(y.at(1, d)).epsilon(1e-12));
}

TEST_CASE("transformer gradients flow but embedder has no trainable surface") {
  Rng rng(59);
  TemporalTransformer::Config cfg;
  cfg.seq_len = 3;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.ff_dim = 16;
  TemporalTransformer tr(cfg, rng);
  auto params = tr.params();
  CHECK(params.size() > 0);

  Tensor x = vtdtest::random_tensor({2, 3, 8}, rng);
  tr.forward(x);
  Tensor gy = vtdtest::random_tensor({2, 8}, rng);
  tr.backward(gy);
  bool any_nonzero = false;
  for (auto* p : params)
    if (p->grad.data.abs().maxCoeff() > 0) any_nonzero = true;
  CHECK(any_nonzero);
}
