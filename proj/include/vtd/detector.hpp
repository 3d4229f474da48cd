#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtd/fusion.hpp"
#include "vtd/global_branch.hpp"
#include "vtd/local_branch.hpp"

namespace vtd {

enum class DetectorVariant { GLOBAL_ONLY, CONCAT, CA_FUSION };

const char* to_string(DetectorVariant v);
DetectorVariant detector_variant_from_string(const std::string& s);

struct DetectorConfig {
  int64_t channels = 128;  // C; also the transformer token dim D
  int64_t reduction = 4;
  int64_t clip_length = kDefaultClipLength;
  int64_t heads = 4;
  int64_t layers = 2;
  int64_t ff_dim = 256;
  bool abs_map = false;  // feed |aggregated error| instead of the signed map
  DetectorVariant variant = DetectorVariant::CA_FUSION;
  FrameEmbedder::Config embedder;
};

struct LoadedDetector;

// Full detection network over per-clip branch inputs. The frame predictor and
// the frame embedder stay outside: they are frozen feature producers whose
// outputs (aggregated error map, embedding sequence) come in through the
// feature builder.
class Detector {
 public:
  Detector() = default;
  Detector(const DetectorConfig& cfg, Rng& rng);

  // agg: [N, 3, H, W], emb: [N, T, D] -> P(FAKE) per clip [N]
  Tensor forward(const Tensor& agg, const Tensor& emb, nn::Mode mode);
  void backward(const Tensor& gprobs);
  Tensor infer(const Tensor& agg, const Tensor& emb) const;

  std::vector<nn::Param*> params();  // trainables of the active variant

  void save(const std::string& path, const FramePredictor& predictor,
            const FrameEmbedder& embedder) const;
  static LoadedDetector load(const std::string& path);

  const DetectorConfig& config() const { return cfg_; }

  LocalEncoder local_encoder;
  TemporalTransformer transformer;
  FusionGate gate;
  nn::Linear concat_proj;  // 2C -> C, CONCAT variant only
  ClassifierHead head;

 private:
  DetectorConfig cfg_;
  Tensor f_local_, f_glob_, rho_;
};

// Everything eval needs from one checkpoint file.
struct LoadedDetector {
  Detector detector;
  FramePredictor predictor;
  FrameEmbedder embedder;
};

}  // namespace vtd
