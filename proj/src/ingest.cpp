#include "vtd/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vtd/errors.hpp"
#include "vtd/rng.hpp"

namespace vtd {

std::vector<int64_t> slice_clips(int64_t frame_count, int64_t clip_length, int64_t stride) {
  if (clip_length < 2) throw Error("Precondition", "clip_length must be >= 2");
  if (stride < 1) throw Error("Precondition", "stride must be >= 1");
  std::vector<int64_t> starts;
  if (frame_count < clip_length) return starts;
  for (int64_t s = 0; s + clip_length <= frame_count; s += stride) starts.push_back(s);
  return starts;
}

std::vector<ClipRef> enumerate_clips(const std::vector<VideoRecord>& records,
                                     int64_t clip_length, int64_t stride) {
  std::vector<ClipRef> refs;
  for (const auto& rec : records) {
    for (int64_t start : slice_clips(rec.frame_count, clip_length, stride))
      refs.push_back(ClipRef{&rec, start});
  }
  return refs;
}

SplitAssignment assign_splits(std::vector<VideoRecord> records,
                              const std::array<double, 3>& ratio, uint64_t seed) {
  const double sum = ratio[0] + ratio[1] + ratio[2];
  if (std::abs(sum - 1.0) > 1e-9) throw Error("Precondition", "split ratio must sum to 1");

  SplitAssignment out;
  out.manifest.split_seed = seed;
  out.manifest.split_ratio = ratio;

  // group record indices per (label, generator_tag) stratum, in first-seen order
  std::vector<std::pair<std::string, std::vector<size_t>>> strata;
  auto stratum_key = [](const VideoRecord& r) {
    return std::string(to_string(r.label)) + "/" + r.generator_tag;
  };
  for (size_t i = 0; i < records.size(); ++i) {
    const std::string key = stratum_key(records[i]);
    auto it = std::find_if(strata.begin(), strata.end(),
                           [&](const auto& s) { return s.first == key; });
    if (it == strata.end())
      strata.push_back({key, {i}});
    else
      it->second.push_back(i);
  }

  for (auto& [key, idx] : strata) {
    const size_t n = idx.size();
    if (n < 3)
      out.warnings.push_back("EmptyStratum: stratum '" + key + "' has only " +
                             std::to_string(n) + " records");

    // largest-remainder quota per split
    std::array<size_t, 3> quota{};
    std::array<double, 3> frac{};
    size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = ratio[static_cast<size_t>(s)] * static_cast<double>(n);
      quota[static_cast<size_t>(s)] = static_cast<size_t>(std::floor(exact));
      frac[static_cast<size_t>(s)] = exact - std::floor(exact);
      assigned += quota[static_cast<size_t>(s)];
    }
    while (assigned < n) {
      int best = 0;
      for (int s = 1; s < 3; ++s)
        if (frac[static_cast<size_t>(s)] > frac[static_cast<size_t>(best)] + 1e-12) best = s;
      quota[static_cast<size_t>(best)]++;
      frac[static_cast<size_t>(best)] = -1.0;
      assigned++;
    }

    // deterministic shuffle inside the stratum, then fill TRAIN/VAL/TEST
    Rng rng = Rng(seed).fork(key);
    for (size_t i = n; i > 1; --i)
      std::swap(idx[i - 1], idx[rng.uniform_int(i)]);

    size_t pos = 0;
    const Split splits[3] = {Split::TRAIN, Split::VAL, Split::TEST};
    for (int s = 0; s < 3; ++s)
      for (size_t k = 0; k < quota[static_cast<size_t>(s)]; ++k)
        records[idx[pos++]].split = splits[s];
  }

  out.manifest.records = std::move(records);
  return out;
}

Clip make_clip(const VideoRecord& rec, const DecodedVideo& video, int64_t start,
               int64_t clip_length) {
  const int64_t n = static_cast<int64_t>(video.frames.size());
  if (start < 0 || start + clip_length > n)
    throw Error("Precondition", "clip window outside decoded frame range");
  Clip clip;
  clip.source_id = rec.source_id();
  clip.label = rec.label;
  clip.generator_tag = rec.generator_tag;
  clip.degradation = rec.degradation;
  clip.decode_degraded = video.degraded;
  clip.frames.assign(video.frames.begin() + start, video.frames.begin() + start + clip_length);
  return clip;
}

}  // namespace vtd
