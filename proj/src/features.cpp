#include "vtd/features.hpp"

#include <atomic>
#include <thread>

#include "vtd/errors.hpp"
#include "vtd/ingest.hpp"

namespace vtd {

std::vector<ClipFeatures> build_clip_features(const std::vector<VideoRecord>& records,
                                              FrameStore& store,
                                              const FramePredictor& predictor,
                                              const EmbeddingSource& embedder,
                                              const FeatureBuildConfig& cfg,
                                              std::vector<FeatureBuildFailure>* failures) {
  struct Slot {
    std::vector<ClipFeatures> clips;
    std::string failure;
  };
  std::vector<Slot> slots(records.size());

  auto process = [&](size_t ri) {
    const VideoRecord& rec = records[ri];
    try {
      const DecodedVideo& video = store.get(rec.path, cfg.tolerate_decode_errors);
      // slice on what actually decoded; concealed streams may come up short
      const int64_t usable = static_cast<int64_t>(video.frames.size());
      for (int64_t start : slice_clips(usable, cfg.clip_length, cfg.stride)) {
        Clip clip = make_clip(rec, video, start, cfg.clip_length);
        ClipFeatures f;
        f.source_id = clip.source_id;
        f.start = start;
        f.clip_id = clip.source_id + ":" + std::to_string(start);
        f.label = clip.label;
        f.generator_tag = clip.generator_tag;
        f.degradation = clip.degradation;
        f.decode_degraded = clip.decode_degraded;

        Tensor agg = aggregate_prediction_errors(compute_prediction_errors(predictor, clip));
        if (cfg.abs_map) agg.data = agg.data.abs();
        f.agg_chw = hwc_to_chw(agg);
        f.emb = embedder.embed_clip(clip).tokens;
        slots[ri].clips.push_back(std::move(f));
      }
    } catch (const std::exception& e) {
      slots[ri].failure = e.what();
    }
  };

  const int workers = std::max(1, cfg.workers);
  if (workers == 1 || records.size() <= 1) {
    for (size_t i = 0; i < records.size(); ++i) process(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          const size_t i = next.fetch_add(1);
          if (i >= records.size()) return;
          process(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<ClipFeatures> out;
  for (size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].failure.empty()) {
      if (failures)
        failures->push_back(FeatureBuildFailure{records[i].path, slots[i].failure});
      continue;
    }
    for (auto& f : slots[i].clips) out.push_back(std::move(f));
  }
  return out;
}

}  // namespace vtd
