#include "vtd/detector.hpp"

#include "vtd/errors.hpp"

namespace vtd {

const char* to_string(DetectorVariant v) {
  switch (v) {
    case DetectorVariant::GLOBAL_ONLY: return "global_only";
    case DetectorVariant::CONCAT: return "concat";
    default: return "ca_fusion";
  }
}

DetectorVariant detector_variant_from_string(const std::string& s) {
  if (s == "global_only") return DetectorVariant::GLOBAL_ONLY;
  if (s == "concat") return DetectorVariant::CONCAT;
  if (s == "ca_fusion") return DetectorVariant::CA_FUSION;
  throw Error("ParseError", "unknown detector variant: " + s);
}

Detector::Detector(const DetectorConfig& cfg, Rng& rng) : cfg_(cfg) {
  const int64_t c = cfg.channels;
  local_encoder = LocalEncoder(c, rng);
  TemporalTransformer::Config tcfg;
  tcfg.seq_len = cfg.clip_length;
  tcfg.dim = c;
  tcfg.heads = cfg.heads;
  tcfg.layers = cfg.layers;
  tcfg.ff_dim = cfg.ff_dim;
  transformer = TemporalTransformer(tcfg, rng);
  gate = FusionGate(c, cfg.reduction, rng);
  concat_proj = nn::Linear("concat_proj", 2 * c, c, rng);
  head = ClassifierHead(c, rng);
}

Tensor Detector::forward(const Tensor& agg, const Tensor& emb, nn::Mode mode) {
  const int64_t n = emb.dim(0), c = cfg_.channels;
  f_glob_ = transformer.forward(emb);

  switch (cfg_.variant) {
    case DetectorVariant::GLOBAL_ONLY:
      return head.forward(f_glob_);
    case DetectorVariant::CONCAT: {
      f_local_ = local_encoder.forward(agg);
      Tensor cat({n, 2 * c});
      for (int64_t i = 0; i < n; ++i) {
        std::copy(f_local_.data.data() + i * c, f_local_.data.data() + (i + 1) * c,
                  cat.data.data() + i * 2 * c);
        std::copy(f_glob_.data.data() + i * c, f_glob_.data.data() + (i + 1) * c,
                  cat.data.data() + i * 2 * c + c);
      }
      return head.forward(concat_proj.forward(cat));
    }
    default: {
      f_local_ = local_encoder.forward(agg);
      Tensor s = f_local_;
      s.data += f_glob_.data;
      rho_ = gate.forward(s, mode);
      return head.forward(fuse(f_local_, f_glob_, rho_));
    }
  }
}

Tensor Detector::infer(const Tensor& agg, const Tensor& emb) const {
  const int64_t n = emb.dim(0), c = cfg_.channels;
  Tensor f_glob = transformer.infer(emb);

  switch (cfg_.variant) {
    case DetectorVariant::GLOBAL_ONLY:
      return head.infer(f_glob);
    case DetectorVariant::CONCAT: {
      Tensor f_local = local_encoder.infer(agg);
      Tensor cat({n, 2 * c});
      for (int64_t i = 0; i < n; ++i) {
        std::copy(f_local.data.data() + i * c, f_local.data.data() + (i + 1) * c,
                  cat.data.data() + i * 2 * c);
        std::copy(f_glob.data.data() + i * c, f_glob.data.data() + (i + 1) * c,
                  cat.data.data() + i * 2 * c + c);
      }
      return head.infer(concat_proj.infer(cat));
    }
    default: {
      Tensor f_local = local_encoder.infer(agg);
      Tensor s = f_local;
      s.data += f_glob.data;
      return head.infer(fuse(f_local, f_glob, gate.infer(s)));
    }
  }
}

void Detector::backward(const Tensor& gprobs) {
  const int64_t c = cfg_.channels;

  switch (cfg_.variant) {
    case DetectorVariant::GLOBAL_ONLY: {
      Tensor g_glob = head.backward(gprobs);
      transformer.backward(g_glob);
      return;
    }
    case DetectorVariant::CONCAT: {
      Tensor gcat = concat_proj.backward(head.backward(gprobs));
      const int64_t n = gcat.dim(0);
      Tensor g_local({n, c}), g_glob({n, c});
      for (int64_t i = 0; i < n; ++i) {
        std::copy(gcat.data.data() + i * 2 * c, gcat.data.data() + i * 2 * c + c,
                  g_local.data.data() + i * c);
        std::copy(gcat.data.data() + i * 2 * c + c, gcat.data.data() + (i + 1) * 2 * c,
                  g_glob.data.data() + i * c);
      }
      local_encoder.backward(g_local);
      transformer.backward(g_glob);
      return;
    }
    default: {
      Tensor g_fused = head.backward(gprobs);
      FuseGrads fg = fuse_backward(g_fused, f_local_, f_glob_, rho_);
      Tensor gs = gate.backward(fg.g_rho);  // gate input s = f_local + f_glob
      fg.g_local.data += gs.data;
      fg.g_glob.data += gs.data;
      local_encoder.backward(fg.g_local);
      transformer.backward(fg.g_glob);
      return;
    }
  }
}

std::vector<nn::Param*> Detector::params() {
  std::vector<nn::Param*> out;
  switch (cfg_.variant) {
    case DetectorVariant::GLOBAL_ONLY:
      break;
    case DetectorVariant::CONCAT:
      for (auto* p : local_encoder.params()) out.push_back(p);
      concat_proj.collect(out);
      break;
    default:
      for (auto* p : local_encoder.params()) out.push_back(p);
      for (auto* p : gate.params()) out.push_back(p);
      break;
  }
  for (auto* p : transformer.params()) out.push_back(p);
  for (auto* p : head.params()) out.push_back(p);
  return out;
}

void Detector::save(const std::string& path, const FramePredictor& predictor,
                    const FrameEmbedder& embedder) const {
  if (!predictor.frozen())
    throw Error("Precondition", "refusing to checkpoint an unfrozen predictor");
  Checkpoint ck;
  ck.meta["version"] = 1;
  ck.meta["kind"] = "detector";
  ck.meta["variant"] = to_string(cfg_.variant);
  ck.meta["channels"] = cfg_.channels;
  ck.meta["reduction"] = cfg_.reduction;
  ck.meta["clip_length"] = cfg_.clip_length;
  ck.meta["heads"] = cfg_.heads;
  ck.meta["layers"] = cfg_.layers;
  ck.meta["ff_dim"] = cfg_.ff_dim;
  ck.meta["abs_map"] = cfg_.abs_map;
  ck.meta["predictor_base_channels"] = predictor.arch.base_channels;

  local_encoder.save_into(ck, "det.");
  transformer.save_into(ck, "det.");
  gate.save_into(ck, "det.");
  ck.add("det.concat_proj.w", concat_proj.w.value);
  ck.add("det.concat_proj.b", concat_proj.b.value);
  head.save_into(ck, "det.");
  predictor.save_into(ck, "frozen.");
  embedder.save_into(ck, "frozen.emb.");
  ck.save(path);
}

LoadedDetector Detector::load(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta.value("kind", "") != "detector")
    throw Error("CheckpointMeta", "not a detector checkpoint: " + path);

  DetectorConfig cfg;
  cfg.variant = detector_variant_from_string(ck.meta.at("variant").get<std::string>());
  cfg.channels = ck.meta.at("channels").get<int64_t>();
  cfg.reduction = ck.meta.at("reduction").get<int64_t>();
  cfg.clip_length = ck.meta.at("clip_length").get<int64_t>();
  cfg.heads = ck.meta.at("heads").get<int64_t>();
  cfg.layers = ck.meta.at("layers").get<int64_t>();
  cfg.ff_dim = ck.meta.at("ff_dim").get<int64_t>();
  cfg.abs_map = ck.meta.at("abs_map").get<bool>();

  LoadedDetector out;
  Rng rng(0);  // immediately overwritten by checkpoint values
  out.detector = Detector(cfg, rng);
  out.detector.local_encoder.load_from(ck, "det.");
  out.detector.transformer.load_from(ck, "det.");
  out.detector.gate.load_from(ck, "det.");
  out.detector.concat_proj.w.value = ck.get("det.concat_proj.w");
  out.detector.concat_proj.b.value = ck.get("det.concat_proj.b");
  out.detector.head.load_from(ck, "det.");

  out.predictor =
      FramePredictor(FramePredictor::Arch{ck.meta.at("predictor_base_channels").get<int64_t>()},
                     rng);
  out.predictor.load_from(ck, "frozen.");
  out.predictor.freeze();
  out.embedder = FrameEmbedder::load_from(ck, "frozen.emb.");
  out.detector.cfg_.embedder = out.embedder.config();
  return out;
}

}  // namespace vtd
