#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "testutil.hpp"
#include "vtd/ingest.hpp"

using namespace vtd;

namespace {

// independent enumeration oracle for clip starts
std::vector<int64_t> enumerate_starts(int64_t frame_count, int64_t clip_length,
                                      int64_t stride) {
  std::vector<int64_t> starts;
  for (int64_t s = 0; s < frame_count; ++s) {
    if (s % stride != 0) continue;
    if (s + clip_length <= frame_count) starts.push_back(s);
  }
  return starts;
}

std::vector<VideoRecord> make_records(int n, Label label, const std::string& tag) {
  std::vector<VideoRecord> out;
  for (int i = 0; i < n; ++i) {
    VideoRecord r;
    r.path = std::string(to_string(label)) + "_" + tag + "_" + std::to_string(i) + ".mp4";
    r.label = label;
    r.generator_tag = tag;
    r.frame_count = 24;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST_CASE("slice_clips spec examples") {
  CHECK(slice_clips(24, 7, 1).size() == 18);
  CHECK(slice_clips(24, 7, 1).front() == 0);
  CHECK(slice_clips(24, 7, 1).back() == 17);
  CHECK(slice_clips(7, 7, 1) == std::vector<int64_t>{0});
  CHECK(slice_clips(6, 7, 1).empty());
}

TEST_CASE("slice_clips matches the enumeration oracle exhaustively") {
  for (int64_t fc = 0; fc <= 100; ++fc)
    for (int64_t cl = 2; cl <= 12; ++cl)
      for (int64_t stride = 1; stride <= 6; ++stride) {
        const auto got = slice_clips(fc, cl, stride);
        const auto want = enumerate_starts(fc, cl, stride);
        REQUIRE(got == want);
        // closed-form count from the contract
        const int64_t expected_count = fc >= cl ? (fc - cl) / stride + 1 : 0;
        REQUIRE(static_cast<int64_t>(got.size()) == expected_count);
      }
}

TEST_CASE("slice_clips rejects bad preconditions") {
  CHECK_THROWS_AS(slice_clips(10, 1, 1), Error);
  CHECK_THROWS_AS(slice_clips(10, 7, 0), Error);
}

TEST_CASE("assign_splits: 1000 records at 8:1:1 lands exactly 800/100/100") {
  auto records = make_records(1000, Label::REAL, "");
  const auto sa = assign_splits(records, {0.8, 0.1, 0.1}, 7);
  std::map<Split, int> counts;
  for (const auto& r : sa.manifest.records) counts[r.split]++;
  CHECK(counts[Split::TRAIN] == 800);
  CHECK(counts[Split::VAL] == 100);
  CHECK(counts[Split::TEST] == 100);
}

TEST_CASE("assign_splits is deterministic per seed and varies across seeds") {
  auto records = make_records(50, Label::FAKE, "drift");
  const auto a = assign_splits(records, {0.8, 0.1, 0.1}, 7);
  const auto b = assign_splits(records, {0.8, 0.1, 0.1}, 7);
  CHECK(a.manifest == b.manifest);

  const auto c = assign_splits(records, {0.8, 0.1, 0.1}, 8);
  CHECK(a.manifest.records != c.manifest.records);
}

TEST_CASE("assign_splits: 10 records split 8/1/1 (largest remainder, exhaustive)") {
  auto records = make_records(10, Label::REAL, "");
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const auto sa = assign_splits(records, {0.8, 0.1, 0.1}, seed);
    std::map<Split, int> counts;
    for (const auto& r : sa.manifest.records) counts[r.split]++;
    REQUIRE(counts[Split::TRAIN] == 8);
    REQUIRE(counts[Split::VAL] == 1);
    REQUIRE(counts[Split::TEST] == 1);
  }
}

TEST_CASE("assign_splits keeps every stratum within one record of its quota") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<VideoRecord> records;
    const int n_real = 5 + static_cast<int>(rng.uniform_int(40));
    const int n_a = 5 + static_cast<int>(rng.uniform_int(40));
    const int n_b = 5 + static_cast<int>(rng.uniform_int(40));
    for (auto& r : make_records(n_real, Label::REAL, "")) records.push_back(r);
    for (auto& r : make_records(n_a, Label::FAKE, "a")) records.push_back(r);
    for (auto& r : make_records(n_b, Label::FAKE, "b")) records.push_back(r);

    const std::array<double, 3> ratio{0.8, 0.1, 0.1};
    const auto sa = assign_splits(records, ratio, rng.next_u64());

    std::map<std::string, std::map<Split, int>> per_stratum;
    for (const auto& r : sa.manifest.records)
      per_stratum[std::string(to_string(r.label)) + "/" + r.generator_tag][r.split]++;
    REQUIRE(per_stratum.size() == 3);
    for (auto& [key, counts] : per_stratum) {
      const int n = counts[Split::TRAIN] + counts[Split::VAL] + counts[Split::TEST];
      const Split splits[3] = {Split::TRAIN, Split::VAL, Split::TEST};
      for (int s = 0; s < 3; ++s) {
        const double exact = ratio[static_cast<size_t>(s)] * n;
        REQUIRE(std::abs(counts[splits[s]] - exact) <= 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("assign_splits warns on strata smaller than 3") {
  auto records = make_records(2, Label::FAKE, "tiny");
  const auto sa = assign_splits(records, {0.8, 0.1, 0.1}, 1);
  REQUIRE(sa.warnings.size() == 1);
  CHECK(sa.warnings[0].find("EmptyStratum") != std::string::npos);
}

TEST_CASE("assign_splits rejects ratios that do not sum to 1") {
  auto records = make_records(10, Label::REAL, "");
  CHECK_THROWS_AS(assign_splits(records, {0.8, 0.1, 0.2}, 1), Error);
}

TEST_CASE("no video appears in two splits; clips never straddle sources") {
  auto records = make_records(30, Label::REAL, "");
  const auto sa = assign_splits(records, {0.8, 0.1, 0.1}, 3);
  std::map<std::string, std::set<Split>> seen;
  for (const auto& r : sa.manifest.records) seen[r.source_id()].insert(r.split);
  for (auto& [id, splits] : seen) REQUIRE(splits.size() == 1);

  // clip enumeration carries its source with it
  const auto refs = enumerate_clips(sa.manifest.records, 7, 1);
  CHECK(refs.size() == 30u * 18u);
  for (const auto& ref : refs) {
    REQUIRE(ref.record != nullptr);
    REQUIRE(ref.start + 7 <= ref.record->frame_count);
  }
}

TEST_CASE("make_clip carries provenance and rejects bad windows") {
  Rng rng(5);
  DecodedVideo video;
  for (int i = 0; i < 10; ++i) video.frames.push_back(vtdtest::make_frame(8, 8, i, rng));
  VideoRecord rec{"some/dir/vid_7.mp4", Label::FAKE, "drift", Split::TRAIN, 10, {}};

  const Clip clip = make_clip(rec, video, 2, 7);
  CHECK(clip.source_id == "vid_7");
  CHECK(clip.label == Label::FAKE);
  CHECK(clip.generator_tag == "drift");
  CHECK(clip.frames.size() == 7);
  CHECK(clip.frames[0].timestamp_index == 2);
  CHECK(clip.violation().empty());

  CHECK_THROWS_AS(make_clip(rec, video, 4, 7), Error);
}
